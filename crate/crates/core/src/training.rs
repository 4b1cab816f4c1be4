//! Episodic training: cross-entropy over target-prototype and NOTA logits,
//! single-episode SGD steps, averaged NOTA-vector initialization, per-epoch
//! dev evaluation and early stopping.
//!
//! An epoch is a fixed number of independently sampled episodes. Each sampled
//! support set is reused for `queries_per_support` consecutive steps (the
//! support *sample* is shared; encodings are recomputed every step since the
//! parameters move). Training episodes default to the fixed-NOTA regime with
//! `p_target = 0.5`, i.e. a 50% NOTA rate; the realistic regime is available.
//!
//! In supervised (non-transfer) mode, target relations are drawn from the
//! test relation set while support/query instances come from the train
//! section, whose original eval-category labels are recovered through the
//! dataset's provenance map.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{LabelId, RelationInstance, Section};
use crate::encoder::{
    bytes_to_floats, encode, encode_gradient, floats_to_bytes, EncoderConfig, EncoderGrad,
    EncoderParams, VectorSource,
};
use crate::error::{Error, Result};
use crate::evaluation;
use crate::rng;
use crate::rules::DecisionRule;
use crate::sampler::{EpisodeSampler, EpisodeSet, SampleConfig, SupportDraw};
use crate::transform::FewShotDataset;
use crate::util::dot_unchecked;

pub const MODEL_FORMAT: &str = "fsrc-model";
pub const MODEL_VERSION: u32 = 1;

/// How many instances are averaged per NOTA vector at initialization.
const NOTA_INIT_SAMPLE: usize = 10;

// Stream indices under the training seed; documented so runs are replayable.
const STREAM_NOTA_INIT: u64 = 1;
const STREAM_DEV: u64 = 2;
const STREAM_TRAIN: u64 = 3;

/// NOTA decision mechanism to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NotaMode {
    /// Plain nearest-prototype classification; episodes must not have NOTA golds.
    NoNota,
    Threshold,
    Nav,
    Mnav { vectors: usize },
}

impl NotaMode {
    pub fn parse(name: &str, mnav_vectors: usize) -> Option<NotaMode> {
        match name.to_ascii_lowercase().as_str() {
            "no-nota" | "nonota" | "none" => Some(NotaMode::NoNota),
            "threshold" => Some(NotaMode::Threshold),
            "nav" => Some(NotaMode::Nav),
            "mnav" => Some(NotaMode::Mnav {
                vectors: mnav_vectors,
            }),
            _ => None,
        }
    }
}

/// Episode regime used for training (and for the fixed dev set).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum TrainRegime {
    Realistic,
    FixedNota { p_target: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n: usize,
    pub k: usize,
    pub episodes_per_epoch: usize,
    pub queries_per_support: usize,
    pub max_epochs: usize,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    pub learning_rate: f64,
    pub nota_mode: NotaMode,
    pub seed: u64,
    pub supervised_mode: bool,
    pub regime: TrainRegime,
    /// Size of the fixed dev episode set scored after each epoch.
    pub dev_episodes: usize,
    pub encoder: EncoderConfig,
}

impl TrainConfig {
    pub fn new(n: usize, k: usize, nota_mode: NotaMode, seed: u64) -> TrainConfig {
        TrainConfig {
            n,
            k,
            episodes_per_epoch: 2000,
            queries_per_support: 3,
            max_epochs: 30,
            patience: 5,
            learning_rate: 0.1,
            nota_mode,
            seed,
            supervised_mode: false,
            regime: TrainRegime::FixedNota { p_target: 0.5 },
            dev_episodes: 1000,
            encoder: EncoderConfig {
                seed,
                ..EncoderConfig::default()
            },
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0
            || self.k == 0
            || self.episodes_per_epoch == 0
            || self.queries_per_support == 0
            || self.max_epochs == 0
            || self.dev_episodes == 0
        {
            return Err(Error::Training("counts must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Training("learning rate must be non-negative".into()));
        }
        if let NotaMode::Mnav { vectors } = self.nota_mode {
            if vectors == 0 {
                return Err(Error::Training("mnav requires at least one vector".into()));
            }
        }
        if let TrainRegime::FixedNota { p_target } = self.regime {
            if !(0.0..=1.0).contains(&p_target) {
                return Err(Error::Training(format!("p_target {p_target} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Encoder weights plus the trained decision rule and bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub encoder: EncoderParams,
    pub rule: DecisionRule,
    pub epoch: usize,
    pub best_dev: f64,
}

impl ModelState {
    pub fn vector_source(&self) -> VectorSource<'_> {
        VectorSource::Params(&self.encoder)
    }
}

/// Initializes NOTA vectors by sampling a train relation and averaging up to
/// ten of its instance encodings, once per vector. This scatters the vectors
/// inside the subspace populated by the encoder, which keeps MNAV's vectors
/// from collapsing onto a single useful one.
pub fn init_nota_vectors<R: Rng>(
    ds: &FewShotDataset,
    params: &EncoderParams,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    init_nota_vectors_over(ds.section(Section::Train), params, count, rng)
}

/// As [`init_nota_vectors`], over an explicit instance slice (used for the
/// supervised-mode relabeled view of the train section).
pub fn init_nota_vectors_over<R: Rng>(
    instances: &[RelationInstance],
    params: &EncoderParams,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let mut by_relation: BTreeMap<&str, Vec<&RelationInstance>> = BTreeMap::new();
    for inst in instances {
        if let LabelId::Named(name) = &inst.label {
            by_relation.entry(name.as_str()).or_default().push(inst);
        }
    }
    if by_relation.is_empty() {
        return Err(Error::Training(
            "no named relations available for NOTA-vector initialization".into(),
        ));
    }
    let relations: Vec<&str> = by_relation.keys().copied().collect();
    let mut vectors = Vec::with_capacity(count);
    for _ in 0..count {
        let rel = relations[rng.random_range(0..relations.len())];
        let pool = &by_relation[rel];
        let take = pool.len().min(NOTA_INIT_SAMPLE);
        let picks = rand::seq::index::sample(rng, pool.len(), take);
        let mut mean = vec![0.0; params.out_dim()];
        for idx in picks.iter() {
            let enc = encode(params, pool[idx]);
            for (m, v) in mean.iter_mut().zip(&enc.vector) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= take as f64;
        }
        vectors.push(mean);
    }
    Ok(vectors)
}

/// Loss and the logit vector it was computed from (targets in episode order,
/// then the NOTA logit when the rule provides one).
#[derive(Debug, Clone, PartialEq)]
pub struct LossOut {
    pub loss: f64,
    pub logits: Vec<f64>,
}

/// Episodic cross-entropy: `-log softmax(logits)[gold]`, where the logits are
/// the query-prototype dot products plus the rule's NOTA logit. `gold = None`
/// means the gold answer is NOTA.
pub fn episode_loss(
    rule: &DecisionRule,
    query: &[f64],
    prototypes: &[Vec<f64>],
    gold: Option<usize>,
) -> Result<LossOut> {
    let (out, _, _) = loss_parts(rule, query, prototypes, gold)?;
    Ok(out)
}

/// Shared forward pass: loss, softmax gradient over logits, and the index of
/// the MNAV vector that won the max (when applicable).
fn loss_parts(
    rule: &DecisionRule,
    query: &[f64],
    prototypes: &[Vec<f64>],
    gold: Option<usize>,
) -> Result<(LossOut, Vec<f64>, Option<usize>)> {
    let n = prototypes.len();
    let mut logits = Vec::with_capacity(n + 1);
    for proto in prototypes {
        if proto.len() != query.len() {
            return Err(Error::DimMismatch {
                left: query.len(),
                right: proto.len(),
            });
        }
        logits.push(dot_unchecked(query, proto));
    }
    let nota = rule.nota_logit(query)?;
    let mut winner = None;
    if let Some((score, idx)) = nota {
        logits.push(score);
        winner = Some(idx);
    }
    let gold_index = match gold {
        Some(j) if j < n => j,
        Some(j) => {
            return Err(Error::Training(format!(
                "gold index {j} out of range for {n} targets"
            )))
        }
        None => {
            if nota.is_none() {
                return Err(Error::Training(
                    "gold NOTA requires a rule with a NOTA mechanism".into(),
                ));
            }
            n
        }
    };
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let loss = z.ln() + max - logits[gold_index];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / z).collect();
    grad[gold_index] -= 1.0;
    Ok((LossOut { loss, logits }, grad, winner))
}

/// One training episode as instance references: the query plus K support
/// instances per target relation, in episode order.
pub struct EpisodeInstances<'a> {
    pub query: &'a RelationInstance,
    pub supports: Vec<Vec<&'a RelationInstance>>,
}

/// Gradients for everything trainable: encoder blocks, θ, and the touched
/// NOTA vectors (for MNAV only the argmax vector receives gradient).
#[derive(Debug, Clone, Default)]
pub struct ModelGrad {
    pub encoder: EncoderGrad,
    pub theta: f64,
    pub nota_vectors: BTreeMap<usize, Vec<f64>>,
}

/// Loss and exact gradients for one episode under the current model.
pub fn episode_grad(
    params: &EncoderParams,
    rule: &DecisionRule,
    episode: &EpisodeInstances<'_>,
    gold: Option<usize>,
) -> Result<(LossOut, ModelGrad)> {
    let query_vec = encode(params, episode.query).vector;
    let mut support_vecs: Vec<Vec<Vec<f64>>> = Vec::with_capacity(episode.supports.len());
    let mut prototypes: Vec<Vec<f64>> = Vec::with_capacity(episode.supports.len());
    for support in &episode.supports {
        if support.is_empty() {
            return Err(Error::EmptySupport);
        }
        let vecs: Vec<Vec<f64>> = support
            .iter()
            .map(|inst| encode(params, inst).vector)
            .collect();
        prototypes.push(crate::rules::prototype(&vecs)?);
        support_vecs.push(vecs);
    }

    let (out, logit_grad, winner) = loss_parts(rule, &query_vec, &prototypes, gold)?;

    let n = prototypes.len();
    let mut grad = ModelGrad {
        encoder: EncoderGrad::zeros(&params.config),
        theta: 0.0,
        nota_vectors: BTreeMap::new(),
    };

    // dL/dq accumulates from target logits and (for vector rules) NOTA.
    let mut dquery = vec![0.0; query_vec.len()];
    for (j, proto) in prototypes.iter().enumerate() {
        let g = logit_grad[j];
        for (dq, p) in dquery.iter_mut().zip(proto) {
            *dq += g * p;
        }
    }
    if logit_grad.len() > n {
        let g_nota = logit_grad[n];
        match rule {
            DecisionRule::Threshold { .. } => grad.theta = g_nota,
            DecisionRule::Nav { vector } => {
                add_nota_vector_grad(&mut grad, 0, &query_vec, g_nota);
                for (dq, v) in dquery.iter_mut().zip(vector) {
                    *dq += g_nota * v;
                }
            }
            DecisionRule::Mnav { vectors } => {
                let idx = winner.expect("mnav nota logit has a winner");
                add_nota_vector_grad(&mut grad, idx, &query_vec, g_nota);
                for (dq, v) in dquery.iter_mut().zip(&vectors[idx]) {
                    *dq += g_nota * v;
                }
            }
            DecisionRule::NoNota => unreachable!("NoNota produces no NOTA logit"),
        }
    }

    let query_grad = encode_gradient(params, episode.query, &dquery)?;
    grad.encoder.add_scaled(&query_grad, 1.0);

    // dL/dμ_j = g_j * q; the mean spreads it as g_j/K per support instance.
    for (j, support) in episode.supports.iter().enumerate() {
        let g = logit_grad[j];
        if g == 0.0 {
            continue;
        }
        let scale = g / support.len() as f64;
        let upstream: Vec<f64> = query_vec.iter().map(|q| q * scale).collect();
        for inst in support {
            let inst_grad = encode_gradient(params, inst, &upstream)?;
            grad.encoder.add_scaled(&inst_grad, 1.0);
        }
    }
    Ok((out, grad))
}

fn add_nota_vector_grad(grad: &mut ModelGrad, index: usize, query: &[f64], g: f64) {
    let entry = grad
        .nota_vectors
        .entry(index)
        .or_insert_with(|| vec![0.0; query.len()]);
    for (e, q) in entry.iter_mut().zip(query) {
        *e += g * q;
    }
}

/// Plain SGD step: `param -= lr * grad`.
pub fn apply_grad(state: &mut ModelState, grad: &ModelGrad, lr: f64) {
    let d = state.encoder.config.embed_dim;
    for (bucket, g) in &grad.encoder.token_table {
        let row = &mut state.encoder.token_table[bucket * d..(bucket + 1) * d];
        for (p, g) in row.iter_mut().zip(g) {
            *p -= lr * g;
        }
    }
    for (p, g) in state.encoder.markers.iter_mut().zip(&grad.encoder.markers) {
        *p -= lr * g;
    }
    for (p, g) in state
        .encoder
        .projection
        .iter_mut()
        .zip(&grad.encoder.projection)
    {
        *p -= lr * g;
    }
    match &mut state.rule {
        DecisionRule::Threshold { theta } => *theta -= lr * grad.theta,
        DecisionRule::Nav { vector } => {
            if let Some(g) = grad.nota_vectors.get(&0) {
                for (p, g) in vector.iter_mut().zip(g) {
                    *p -= lr * g;
                }
            }
        }
        DecisionRule::Mnav { vectors } => {
            for (idx, g) in &grad.nota_vectors {
                for (p, g) in vectors[*idx].iter_mut().zip(g) {
                    *p -= lr * g;
                }
            }
        }
        DecisionRule::NoNota => {}
    }
}

/// One training-log row. `wall_ms` is the only non-deterministic column;
/// everything else is reproducible from the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub epoch: usize,
    pub train_loss_mean: f64,
    pub dev_micro_f1: f64,
    pub dev_accuracy: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub rows: Vec<TrainLogRow>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss_mean,dev_micro_f1,dev_accuracy,wall_ms\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{}\n",
                row.epoch, row.train_loss_mean, row.dev_micro_f1, row.dev_accuracy, row.wall_ms
            ));
        }
        out
    }

    /// Equality on the reproducible columns (everything but wall time).
    pub fn same_trajectory(&self, other: &TrainLog) -> bool {
        self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| {
                a.epoch == b.epoch
                    && a.train_loss_mean == b.train_loss_mean
                    && a.dev_micro_f1 == b.dev_micro_f1
                    && a.dev_accuracy == b.dev_accuracy
            })
    }
}

/// Relabeled view for supervised (non-transfer) mode: an instance carries a
/// test relation label when its current or provenance label is one; all other
/// labels collapse to NOTA.
fn supervised_view(ds: &FewShotDataset, section: Section) -> Vec<RelationInstance> {
    ds.section(section)
        .iter()
        .map(|inst| {
            let mut out = inst.clone();
            let recovered = match ds.provenance.get(&inst.id) {
                Some(LabelId::Named(l)) if ds.plan.test_relations.contains(l) => Some(l.clone()),
                _ => match &inst.label {
                    LabelId::Named(l) if ds.plan.test_relations.contains(l) => Some(l.clone()),
                    _ => None,
                },
            };
            out.label = match recovered {
                Some(l) => LabelId::Named(l),
                None => LabelId::Nota,
            };
            out
        })
        .collect()
}

struct SectionView {
    instances: Vec<RelationInstance>,
    relations: std::collections::BTreeSet<String>,
}

fn training_view(ds: &FewShotDataset, section: Section, supervised: bool) -> SectionView {
    if supervised {
        SectionView {
            instances: supervised_view(ds, section),
            relations: ds.plan.test_relations.clone(),
        }
    } else {
        SectionView {
            instances: ds.section(section).to_vec(),
            relations: ds.plan.relations(section).clone(),
        }
    }
}

fn draw_query<R: Rng>(
    sampler: &EpisodeSampler<'_>,
    support: &SupportDraw,
    regime: TrainRegime,
    rng: &mut R,
) -> Result<(usize, LabelId)> {
    match regime {
        TrainRegime::Realistic => sampler.draw_query_realistic(support, rng),
        TrainRegime::FixedNota { p_target } => sampler.draw_query_fixed(support, p_target, rng),
    }
}

/// Trains a model on the dataset's train section, evaluating dev micro-F1
/// after each epoch, and returns the checkpoint with the best dev score.
pub fn train(ds: &FewShotDataset, cfg: &TrainConfig) -> Result<(ModelState, TrainLog)> {
    cfg.validate()?;
    let encoder = EncoderParams::init(cfg.encoder.clone());

    let train_view = training_view(ds, Section::Train, cfg.supervised_mode);
    let dev_view = training_view(ds, Section::Dev, cfg.supervised_mode);
    let train_sampler =
        EpisodeSampler::over(&train_view.instances, &train_view.relations, Section::Train, cfg.n, cfg.k)?;
    let dev_sampler =
        EpisodeSampler::over(&dev_view.instances, &dev_view.relations, Section::Dev, cfg.n, cfg.k)?;

    let mut init_rng = rng::stream(cfg.seed, STREAM_NOTA_INIT);
    let rule = match cfg.nota_mode {
        NotaMode::NoNota => DecisionRule::NoNota,
        NotaMode::Threshold => DecisionRule::Threshold { theta: 0.0 },
        NotaMode::Nav => DecisionRule::Nav {
            vector: init_nota_vectors_over(&train_view.instances, &encoder, 1, &mut init_rng)?
                .pop()
                .expect("one vector"),
        },
        NotaMode::Mnav { vectors } => DecisionRule::Mnav {
            vectors: init_nota_vectors_over(&train_view.instances, &encoder, vectors, &mut init_rng)?,
        },
    };

    // Fixed dev episode set, sampled once and scored after every epoch.
    let mut dev_rng = rng::stream(cfg.seed, STREAM_DEV);
    let dev_episodes: Result<Vec<_>> = (0..cfg.dev_episodes)
        .map(|_| {
            let support = dev_sampler.draw_support(&mut dev_rng);
            let (query_idx, gold) = draw_query(&dev_sampler, &support, cfg.regime, &mut dev_rng)?;
            Ok(assemble_episode(&dev_sampler, support, query_idx, gold))
        })
        .collect();
    let dev_config = match cfg.regime {
        TrainRegime::Realistic => SampleConfig::realistic(cfg.n, cfg.k, cfg.seed, Section::Dev),
        TrainRegime::FixedNota { p_target } => {
            SampleConfig::fixed_nota(cfg.n, cfg.k, p_target, cfg.seed, Section::Dev)
        }
    };
    let dev_set = EpisodeSet {
        config: dev_config,
        replica: 0,
        episodes: dev_episodes?,
    };

    let mut state = ModelState {
        encoder,
        rule,
        epoch: 0,
        best_dev: f64::NEG_INFINITY,
    };
    let mut best: Option<ModelState> = None;
    let mut log = TrainLog::default();
    let mut stale_epochs = 0usize;
    let mut train_rng = rng::stream(cfg.seed, STREAM_TRAIN);

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        let mut loss_sum = 0.0;
        let mut steps = 0usize;
        while steps < cfg.episodes_per_epoch {
            let support = train_sampler.draw_support(&mut train_rng);
            let queries = cfg
                .queries_per_support
                .min(cfg.episodes_per_epoch - steps);
            for _ in 0..queries {
                let (query_idx, gold) =
                    draw_query(&train_sampler, &support, cfg.regime, &mut train_rng)?;
                let episode = EpisodeInstances {
                    query: &train_view.instances[query_idx],
                    supports: support
                        .support_indices
                        .iter()
                        .map(|idxs| {
                            idxs.iter()
                                .map(|&i| &train_view.instances[i])
                                .collect::<Vec<_>>()
                        })
                        .collect(),
                };
                let gold_index = match &gold {
                    LabelId::Named(name) => {
                        Some(support.targets.iter().position(|t| t == name).expect(
                            "named gold is one of the episode targets",
                        ))
                    }
                    LabelId::Nota => None,
                };
                let (out, grad) = episode_grad(&state.encoder, &state.rule, &episode, gold_index)?;
                if !out.loss.is_finite() {
                    return Err(Error::Numerical(format!(
                        "loss diverged to {} at epoch {epoch} step {steps}",
                        out.loss
                    )));
                }
                loss_sum += out.loss;
                apply_grad(&mut state, &grad, cfg.learning_rate);
                steps += 1;
            }
        }

        state.epoch = epoch;
        let report = evaluation::evaluate_episodes(
            &state.rule,
            &VectorSource::Params(&state.encoder),
            std::slice::from_ref(&dev_set),
            ds,
        )?;
        let dev_f1 = report.micro_f1.mean;
        let dev_acc = report.accuracy.mean;
        log.rows.push(TrainLogRow {
            epoch,
            train_loss_mean: loss_sum / steps as f64,
            dev_micro_f1: dev_f1,
            dev_accuracy: dev_acc,
            wall_ms: started.elapsed().as_millis() as u64,
        });

        if dev_f1 > state.best_dev {
            state.best_dev = dev_f1;
            best = Some(state.clone());
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= cfg.patience {
                break;
            }
        }
    }

    let best = best.unwrap_or(state);
    Ok((best, log))
}

fn assemble_episode(
    sampler: &EpisodeSampler<'_>,
    support: SupportDraw,
    query_idx: usize,
    gold: LabelId,
) -> crate::sampler::Episode {
    let instances = sampler.instances();
    crate::sampler::Episode {
        support: support
            .targets
            .iter()
            .zip(&support.support_indices)
            .map(|(rel, idxs)| {
                (
                    rel.clone(),
                    idxs.iter().map(|&i| instances[i].id.clone()).collect(),
                )
            })
            .collect(),
        targets: support.targets,
        query_id: instances[query_idx].id.clone(),
        gold,
    }
}

#[derive(Serialize, Deserialize)]
struct ModelSidecar {
    format: String,
    version: u32,
    encoder: EncoderConfig,
    rule_variant: String,
    nota_vectors: usize,
    epoch: usize,
    best_dev: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
}

/// Writes `model.bin` (flat little-endian f64: encoder blocks, then rule
/// parameters) and the `model.json` sidecar.
pub fn save_model(state: &ModelState, dir: &Path, config_hash: Option<String>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut flat = state.encoder.to_flat();
    let (variant, count) = match &state.rule {
        DecisionRule::NoNota => ("no-nota", 0),
        DecisionRule::Threshold { theta } => {
            flat.push(*theta);
            ("threshold", 0)
        }
        DecisionRule::Nav { vector } => {
            flat.extend_from_slice(vector);
            ("nav", 1)
        }
        DecisionRule::Mnav { vectors } => {
            for v in vectors {
                flat.extend_from_slice(v);
            }
            ("mnav", vectors.len())
        }
    };
    let bin_path = dir.join("model.bin");
    std::fs::write(&bin_path, floats_to_bytes(&flat)).map_err(|e| Error::io(&bin_path, e))?;
    let sidecar = ModelSidecar {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        encoder: state.encoder.config.clone(),
        rule_variant: variant.to_string(),
        nota_vectors: count,
        epoch: state.epoch,
        best_dev: state.best_dev,
        config_hash,
    };
    let json_path = dir.join("model.json");
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serialization");
    std::fs::write(&json_path, text + "\n").map_err(|e| Error::io(&json_path, e))
}

pub fn load_model(dir: &Path) -> Result<ModelState> {
    let json_path = dir.join("model.json");
    let text = std::fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let sidecar: ModelSidecar =
        serde_json::from_str(&text).map_err(|e| Error::parse(&json_path, 1, e.to_string()))?;
    if sidecar.format != MODEL_FORMAT {
        return Err(Error::parse(
            &json_path,
            1,
            format!("unexpected model format {:?}", sidecar.format),
        ));
    }
    let bin_path = dir.join("model.bin");
    let bytes = std::fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    let flat = bytes_to_floats(&bytes, &bin_path)?;
    let encoder_len = sidecar.encoder.param_count();
    let d = sidecar.encoder.out_dim;
    let expected = encoder_len
        + match sidecar.rule_variant.as_str() {
            "no-nota" => 0,
            "threshold" => 1,
            "nav" => d,
            "mnav" => sidecar.nota_vectors * d,
            other => {
                return Err(Error::parse(
                    &json_path,
                    1,
                    format!("unknown rule variant {other:?}"),
                ))
            }
        };
    if flat.len() != expected {
        return Err(Error::parse(
            &bin_path,
            0,
            format!("checkpoint holds {} floats, expected {expected}", flat.len()),
        ));
    }
    let encoder = EncoderParams::from_flat(sidecar.encoder.clone(), &flat[..encoder_len])?;
    let rest = &flat[encoder_len..];
    let rule = match sidecar.rule_variant.as_str() {
        "no-nota" => DecisionRule::NoNota,
        "threshold" => DecisionRule::Threshold { theta: rest[0] },
        "nav" => DecisionRule::Nav {
            vector: rest.to_vec(),
        },
        "mnav" => DecisionRule::Mnav {
            vectors: rest.chunks(d).map(|c| c.to_vec()).collect(),
        },
        _ => unreachable!("validated above"),
    };
    Ok(ModelState {
        encoder,
        rule,
        epoch: sidecar.epoch,
        best_dev: sidecar.best_dev,
    })
}
