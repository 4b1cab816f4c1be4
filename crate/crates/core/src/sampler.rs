//! N-way K-shot episode generation.
//!
//! Two regimes are implemented:
//! - **realistic**: after drawing the N support sets, the query is drawn
//!   uniformly from *all* remaining instances of the section, so episodes
//!   inherit the section's label distribution and NOTA rate;
//! - **fixed-nota**: the query class is drawn from the episode's target
//!   relations with probability `p_target` and from the section's remaining
//!   relations otherwise. `p_target = 1` reproduces FewRel 1.0 sampling (the
//!   gold answer is always a target relation); the expected NOTA rate is
//!   `1 - p_target`.
//!
//! Replica `i` of an evaluation run is seeded with `seed + i`, and episode
//! `j` inside a replica draws from stream `j` of that seed (see [`crate::rng`]),
//! which makes episode files byte-reproducible and replica generation
//! embarrassingly parallel.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{LabelId, RelationInstance, Section};
use crate::error::{Error, Result};
use crate::rng;
use crate::transform::FewShotDataset;

pub const EPISODES_FORMAT: &str = "fsrc-episodes";
pub const EPISODES_VERSION: u32 = 1;

/// One evaluation unit: N target relations, N×K support ids, one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    /// Target relations in draw order (the order matters for tie-breaking).
    pub targets: Vec<String>,
    /// Relation -> the K support instance ids drawn for it.
    pub support: BTreeMap<String, Vec<String>>,
    pub query_id: String,
    /// The query's section label if it is a target relation, else NOTA.
    pub gold: LabelId,
}

impl Episode {
    pub fn support_ids(&self) -> impl Iterator<Item = &String> {
        self.support.values().flatten()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    Realistic,
    FixedNota,
}

impl SampleMode {
    pub fn parse(name: &str) -> Option<SampleMode> {
        match name.to_ascii_lowercase().as_str() {
            "realistic" => Some(SampleMode::Realistic),
            "fixed-nota" | "fixed_nota" | "fixed" => Some(SampleMode::FixedNota),
            _ => None,
        }
    }
}

/// Sampling configuration recorded in every episode file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub n: usize,
    pub k: usize,
    pub mode: SampleMode,
    /// Probability that the query class is drawn from the target relations
    /// (fixed-nota mode only). The expected NOTA rate is `1 - p_target`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_target: Option<f64>,
    pub seed: u64,
    pub section: Section,
}

impl SampleConfig {
    pub fn realistic(n: usize, k: usize, seed: u64, section: Section) -> SampleConfig {
        SampleConfig {
            n,
            k,
            mode: SampleMode::Realistic,
            p_target: None,
            seed,
            section,
        }
    }

    pub fn fixed_nota(n: usize, k: usize, p_target: f64, seed: u64, section: Section) -> SampleConfig {
        SampleConfig {
            n,
            k,
            mode: SampleMode::FixedNota,
            p_target: Some(p_target),
            seed,
            section,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 {
            return Err(Error::Sampling("n and k must be at least 1".into()));
        }
        match self.mode {
            SampleMode::Realistic => {
                if self.p_target.is_some() {
                    return Err(Error::Sampling(
                        "p_target applies to fixed-nota mode only".into(),
                    ));
                }
            }
            SampleMode::FixedNota => {
                let p = self
                    .p_target
                    .ok_or_else(|| Error::Sampling("fixed-nota mode requires p_target".into()))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Sampling(format!(
                        "p_target {p} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A batch of episodes drawn from one section under one config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSet {
    pub config: SampleConfig,
    pub replica: usize,
    pub episodes: Vec<Episode>,
}

/// A drawn support layout, before the query is chosen. Exposed so training
/// can reuse one support set for several queries.
#[derive(Debug, Clone)]
pub struct SupportDraw {
    pub targets: Vec<String>,
    /// Per target: indices into the section's instance slice.
    pub support_indices: Vec<Vec<usize>>,
    /// All support indices, ascending, for complement draws.
    pub excluded: Vec<usize>,
}

impl SupportDraw {
    fn support_ids(&self, instances: &[RelationInstance]) -> BTreeMap<String, Vec<String>> {
        self.targets
            .iter()
            .zip(&self.support_indices)
            .map(|(rel, idxs)| {
                (
                    rel.clone(),
                    idxs.iter().map(|&i| instances[i].id.clone()).collect(),
                )
            })
            .collect()
    }
}

/// Validated per-section sampling state: relation index plus the episode
/// shape. Immutable, so one sampler can serve many threads.
pub struct EpisodeSampler<'a> {
    instances: &'a [RelationInstance],
    section: Section,
    /// The section's full relation set from the split plan (size M).
    relation_set: &'a BTreeSet<String>,
    /// Instance indices per named relation present in the section.
    by_relation: BTreeMap<&'a str, Vec<usize>>,
    /// Relations eligible as targets: at least K instances. Sorted.
    eligible: Vec<&'a str>,
    nota_count: usize,
    n: usize,
    k: usize,
}

impl<'a> EpisodeSampler<'a> {
    pub fn new(ds: &'a FewShotDataset, section: Section, n: usize, k: usize) -> Result<EpisodeSampler<'a>> {
        Self::over(
            ds.section(section),
            ds.relations(section),
            section,
            n,
            k,
        )
    }

    /// Builds a sampler over an explicit instance slice and relation set.
    /// Used directly by supervised-mode training, which samples target
    /// relations from the eval relation set over relabeled train-section data.
    pub fn over(
        instances: &'a [RelationInstance],
        relation_set: &'a BTreeSet<String>,
        section: Section,
        n: usize,
        k: usize,
    ) -> Result<EpisodeSampler<'a>> {
        if n == 0 || k == 0 {
            return Err(Error::Sampling("n and k must be at least 1".into()));
        }
        let mut by_relation: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        let mut nota_count = 0usize;
        for (i, inst) in instances.iter().enumerate() {
            match &inst.label {
                LabelId::Named(name) => {
                    if !relation_set.contains(name) {
                        return Err(Error::Sampling(format!(
                            "instance {} labeled {name}, outside the {section} relation set",
                            inst.id
                        )));
                    }
                    by_relation.entry(name.as_str()).or_default().push(i);
                }
                LabelId::Nota => nota_count += 1,
            }
        }
        let m = relation_set.len();
        if m < n {
            return Err(Error::Sampling(format!(
                "{section} section has M={m} relations, fewer than N={n}"
            )));
        }
        // With M = N every query from a named relation is in-target, so NOTA
        // golds can only come from NOTA-labeled instances; require some.
        if m == n && nota_count == 0 {
            return Err(Error::Sampling(format!(
                "{section} section has M=N={n} relations and no NOTA instances"
            )));
        }
        let eligible: Vec<&str> = by_relation
            .iter()
            .filter(|(_, idxs)| idxs.len() >= k)
            .map(|(rel, _)| *rel)
            .collect();
        if eligible.len() < n {
            return Err(Error::Sampling(format!(
                "{section} section has only {} relations with at least K={k} instances; need N={n}",
                eligible.len()
            )));
        }
        if instances.len() < n * k + 1 {
            return Err(Error::Sampling(format!(
                "{section} section has {} instances, not enough for N*K={} support plus a query",
                instances.len(),
                n * k
            )));
        }
        Ok(EpisodeSampler {
            instances,
            section,
            relation_set,
            by_relation,
            eligible,
            nota_count,
            n,
            k,
        })
    }

    pub fn section(&self) -> Section {
        self.section
    }

    pub fn instances(&self) -> &[RelationInstance] {
        self.instances
    }

    pub fn nota_count(&self) -> usize {
        self.nota_count
    }

    /// Draws N target relations (uniform over eligible relations, without
    /// replacement) and K support instances per relation.
    pub fn draw_support<R: Rng>(&self, rng: &mut R) -> SupportDraw {
        let picks = index::sample(rng, self.eligible.len(), self.n);
        let targets: Vec<String> = picks.iter().map(|i| self.eligible[i].to_string()).collect();
        let mut support_indices = Vec::with_capacity(self.n);
        let mut excluded = Vec::with_capacity(self.n * self.k);
        for rel in &targets {
            let pool = &self.by_relation[rel.as_str()];
            let chosen: Vec<usize> = index::sample(rng, pool.len(), self.k)
                .iter()
                .map(|i| pool[i])
                .collect();
            excluded.extend_from_slice(&chosen);
            support_indices.push(chosen);
        }
        excluded.sort_unstable();
        SupportDraw {
            targets,
            support_indices,
            excluded,
        }
    }

    /// Uniform draw over all section instances not in the support.
    pub fn draw_query_realistic<R: Rng>(
        &self,
        support: &SupportDraw,
        rng: &mut R,
    ) -> Result<(usize, LabelId)> {
        let remaining = self.instances.len() - support.excluded.len();
        if remaining == 0 {
            return Err(Error::Sampling(
                "no instances left to draw a query from".into(),
            ));
        }
        let mut pick = rng.random_range(0..remaining);
        // Map the draw into the complement of the (sorted) excluded indices.
        for &e in &support.excluded {
            if pick >= e {
                pick += 1;
            }
        }
        Ok((pick, self.gold_for(pick, &support.targets)))
    }

    /// Fixed-NOTA query draw: target class with probability `p_target`, a
    /// non-target relation of the section otherwise.
    pub fn draw_query_fixed<R: Rng>(
        &self,
        support: &SupportDraw,
        p_target: f64,
        rng: &mut R,
    ) -> Result<(usize, LabelId)> {
        if rng.random::<f64>() < p_target {
            let which = rng.random_range(0..support.targets.len());
            let rel = &support.targets[which];
            let pool = &self.by_relation[rel.as_str()];
            let used = &support.support_indices[which];
            let unused = pool.len() - used.len();
            if unused == 0 {
                return Err(Error::Sampling(format!(
                    "instance exhaustion: relation {rel} has no unused instance for a query"
                )));
            }
            let mut sorted_used = used.clone();
            sorted_used.sort_unstable();
            let mut pick = rng.random_range(0..unused);
            let mut chosen = None;
            let mut cursor = 0usize;
            for &idx in pool {
                if cursor < sorted_used.len() && sorted_used[cursor] == idx {
                    cursor += 1;
                    continue;
                }
                if pick == 0 {
                    chosen = Some(idx);
                    break;
                }
                pick -= 1;
            }
            let idx = chosen.expect("unused count was positive");
            Ok((idx, LabelId::Named(rel.clone())))
        } else {
            let outside: Vec<&String> = self
                .relation_set
                .iter()
                .filter(|rel| !support.targets.iter().any(|t| t == *rel))
                .collect();
            if outside.is_empty() {
                return Err(Error::Sampling(
                    "fixed-nota draw with p_target < 1 but no out-of-target relations".into(),
                ));
            }
            let rel = outside[rng.random_range(0..outside.len())];
            let pool = self
                .by_relation
                .get(rel.as_str())
                .filter(|p| !p.is_empty())
                .ok_or_else(|| {
                    Error::Sampling(format!(
                        "instance exhaustion: relation {rel} has no instances for a NOTA query"
                    ))
                })?;
            let idx = pool[rng.random_range(0..pool.len())];
            Ok((idx, LabelId::Nota))
        }
    }

    fn gold_for(&self, instance_idx: usize, targets: &[String]) -> LabelId {
        match &self.instances[instance_idx].label {
            LabelId::Named(name) if targets.iter().any(|t| t == name) => {
                LabelId::Named(name.clone())
            }
            _ => LabelId::Nota,
        }
    }

    fn assemble(&self, support: SupportDraw, query_idx: usize, gold: LabelId) -> Episode {
        Episode {
            support: support.support_ids(self.instances),
            targets: support.targets,
            query_id: self.instances[query_idx].id.clone(),
            gold,
        }
    }

    pub fn draw_realistic<R: Rng>(&self, rng: &mut R) -> Result<Episode> {
        let support = self.draw_support(rng);
        let (query_idx, gold) = self.draw_query_realistic(&support, rng)?;
        Ok(self.assemble(support, query_idx, gold))
    }

    pub fn draw_fixed<R: Rng>(&self, p_target: f64, rng: &mut R) -> Result<Episode> {
        if p_target < 1.0 && self.relation_set.len() < self.n + 1 {
            return Err(Error::Sampling(format!(
                "fixed-nota mode with p_target < 1 needs at least N+1={} relations, section has {}",
                self.n + 1,
                self.relation_set.len()
            )));
        }
        let support = self.draw_support(rng);
        let (query_idx, gold) = self.draw_query_fixed(&support, p_target, rng)?;
        Ok(self.assemble(support, query_idx, gold))
    }

    pub fn draw(&self, config: &SampleConfig, rng: &mut rng::PortableRng) -> Result<Episode> {
        match config.mode {
            SampleMode::Realistic => self.draw_realistic(rng),
            SampleMode::FixedNota => self.draw_fixed(config.p_target.unwrap_or(1.0), rng),
        }
    }
}

/// Single realistic episode; see [`EpisodeSampler`] for batch sampling.
pub fn sample_episode_realistic<R: Rng>(
    ds: &FewShotDataset,
    section: Section,
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<Episode> {
    EpisodeSampler::new(ds, section, n, k)?.draw_realistic(rng)
}

/// Single fixed-NOTA episode with in-target query probability `p_target`.
pub fn sample_episode_fixed_nota<R: Rng>(
    ds: &FewShotDataset,
    section: Section,
    n: usize,
    k: usize,
    p_target: f64,
    rng: &mut R,
) -> Result<Episode> {
    if !(0.0..=1.0).contains(&p_target) {
        return Err(Error::Sampling(format!("p_target {p_target} outside [0, 1]")));
    }
    EpisodeSampler::new(ds, section, n, k)?.draw_fixed(p_target, rng)
}

/// Draws `replicas` independent episode sets of `episodes_per_replica`
/// episodes each. Replica `i` uses seed `config.seed + i`; episodes inside a
/// replica use per-episode streams, so output is deterministic regardless of
/// thread count.
pub fn sample_eval_replicas(
    ds: &FewShotDataset,
    config: &SampleConfig,
    episodes_per_replica: usize,
    replicas: usize,
) -> Result<Vec<EpisodeSet>> {
    config.validate()?;
    let sampler = EpisodeSampler::new(ds, config.section, config.n, config.k)?;
    (0..replicas)
        .map(|replica| {
            let seed = rng::replica_seed(config.seed, replica);
            let episodes: Result<Vec<Episode>> = (0..episodes_per_replica)
                .into_par_iter()
                .map(|j| {
                    let mut episode_rng = rng::stream(seed, j as u64);
                    sampler.draw(config, &mut episode_rng)
                })
                .collect();
            Ok(EpisodeSet {
                config: config.clone(),
                replica,
                episodes: episodes?,
            })
        })
        .collect()
}

/// Gold-label tallies over episode sets: per-relation frequencies plus the
/// NOTA rate. Exportable as `relation,count,rate` CSV (NOTA last).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub total: usize,
    pub per_relation: BTreeMap<String, usize>,
    pub nota_count: usize,
    pub nota_rate: f64,
}

pub fn episode_stats(sets: &[EpisodeSet]) -> EpisodeStats {
    let mut per_relation: BTreeMap<String, usize> = BTreeMap::new();
    let mut nota_count = 0usize;
    let mut total = 0usize;
    for set in sets {
        for episode in &set.episodes {
            total += 1;
            match &episode.gold {
                LabelId::Named(name) => *per_relation.entry(name.clone()).or_default() += 1,
                LabelId::Nota => nota_count += 1,
            }
        }
    }
    let nota_rate = if total == 0 {
        0.0
    } else {
        nota_count as f64 / total as f64
    };
    EpisodeStats {
        total,
        per_relation,
        nota_count,
        nota_rate,
    }
}

impl EpisodeStats {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("relation,count,rate\n");
        for (rel, count) in &self.per_relation {
            let rate = if self.total == 0 {
                0.0
            } else {
                *count as f64 / self.total as f64
            };
            out.push_str(&format!("{rel},{count},{rate:.6}\n"));
        }
        out.push_str(&format!("NOTA,{},{:.6}\n", self.nota_count, self.nota_rate));
        out
    }
}

#[derive(Serialize, Deserialize)]
struct EpisodeFileHeader {
    format: String,
    version: u32,
    config: SampleConfig,
    replica: usize,
    episodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
}

/// Writes one episode set: a header record, then one episode per line.
pub fn write_episode_set(set: &EpisodeSet, path: &Path, config_hash: Option<String>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let header = EpisodeFileHeader {
        format: EPISODES_FORMAT.to_string(),
        version: EPISODES_VERSION,
        config: set.config.clone(),
        replica: set.replica,
        episodes: set.episodes.len(),
        config_hash,
    };
    (|| -> std::io::Result<()> {
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for episode in &set.episodes {
            serde_json::to_writer(&mut out, episode)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

pub fn read_episode_set(path: &Path) -> Result<EpisodeSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut header: Option<EpisodeFileHeader> = None;
    let mut episodes = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if idx == 0 {
            let h: EpisodeFileHeader = serde_json::from_str(&line)
                .map_err(|e| Error::parse(path, 1, format!("bad header: {e}")))?;
            if h.format != EPISODES_FORMAT {
                return Err(Error::parse(
                    path,
                    1,
                    format!("unexpected format tag {:?}", h.format),
                ));
            }
            header = Some(h);
            continue;
        }
        let episode: Episode = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
        episodes.push(episode);
    }
    let header = header.ok_or_else(|| Error::parse(path, 1, "missing episode header record"))?;
    Ok(EpisodeSet {
        config: header.config,
        replica: header.replica,
        episodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{SectionMap, Span, SupervisedCorpus};
    use crate::transform::{apply_split, PinnedRelations, plan_split};

    fn mk(id: &str, label: &str) -> RelationInstance {
        RelationInstance {
            id: id.to_string(),
            tokens: vec!["w0".into(), "w1".into(), "w2".into(), "w3".into()],
            e1_span: Span::new(0, 1),
            e2_span: Span::new(2, 3),
            label: LabelId::from_raw(label),
        }
    }

    /// Few-shot dataset whose test section holds `spec` = (relation, count)
    /// named instances plus `nota` NOTA instances. Train/dev get one filler
    /// relation each so the plan validates.
    pub(crate) fn dataset_with_test_section(
        spec: &[(&str, usize)],
        nota: usize,
    ) -> FewShotDataset {
        let mut sections: SectionMap<Vec<RelationInstance>> = SectionMap::default();
        sections.train.push(mk("tr-0", "train_rel"));
        sections.train.push(mk("tr-1", "train_rel"));
        sections.dev.push(mk("dv-0", "dev_rel"));
        for (rel, count) in spec {
            for i in 0..*count {
                sections.test.push(mk(&format!("te-{rel}-{i}"), rel));
            }
        }
        for i in 0..nota {
            sections.test.push(mk(&format!("te-nota-{i}"), "NOTA"));
        }
        let mut categories: BTreeSet<String> =
            spec.iter().map(|(rel, _)| rel.to_string()).collect();
        categories.insert("train_rel".into());
        categories.insert("dev_rel".into());
        let corpus = SupervisedCorpus::new(sections, categories).unwrap();
        let pin = PinnedRelations {
            test: spec.iter().map(|(rel, _)| rel.to_string()).collect(),
            dev: vec!["dev_rel".into()],
        };
        let plan = plan_split(&corpus, spec.len(), 1, 0, Some(&pin)).unwrap();
        apply_split(&corpus, &plan).unwrap()
    }

    #[test]
    fn gold_rule_on_small_fixture() {
        // rel A: 3 ids, rel B: 3 ids, NOTA: 4 ids; n=1, k=1.
        let ds = dataset_with_test_section(&[("A", 3), ("B", 3)], 4);
        let mut rng = rng::seeded(11);
        let mut saw_nota = 0;
        let mut saw_named = 0;
        for _ in 0..400 {
            let ep = sample_episode_realistic(&ds, Section::Test, 1, 1, &mut rng).unwrap();
            assert_eq!(ep.targets.len(), 1);
            assert_eq!(ep.support[&ep.targets[0]].len(), 1);
            assert!(!ep.support_ids().any(|id| *id == ep.query_id));
            let query = ds
                .section(Section::Test)
                .iter()
                .find(|i| i.id == ep.query_id)
                .unwrap();
            match &query.label {
                LabelId::Named(name) if ep.targets.contains(name) => {
                    assert_eq!(ep.gold, LabelId::Named(name.clone()));
                    saw_named += 1;
                }
                _ => {
                    assert_eq!(ep.gold, LabelId::Nota);
                    saw_nota += 1;
                }
            }
        }
        assert!(saw_nota > 0 && saw_named > 0);
    }

    #[test]
    fn n_equal_m_without_nota_rejected() {
        let ds = dataset_with_test_section(&[("A", 3), ("B", 3)], 0);
        let err = sample_episode_realistic(&ds, Section::Test, 2, 1, &mut rng::seeded(0)).unwrap_err();
        assert!(matches!(err, Error::Sampling(_)));
        // With NOTA instances present, M = N is allowed.
        let ds2 = dataset_with_test_section(&[("A", 3), ("B", 3)], 2);
        assert!(sample_episode_realistic(&ds2, Section::Test, 2, 1, &mut rng::seeded(0)).is_ok());
    }

    #[test]
    fn relations_below_k_are_not_targets() {
        // B has a single instance: with k=2 it cannot be a target, but it can
        // still be drawn as a NOTA query.
        let ds = dataset_with_test_section(&[("A", 5), ("B", 1), ("C", 4)], 0);
        let mut rng = rng::seeded(3);
        for _ in 0..200 {
            let ep = sample_episode_realistic(&ds, Section::Test, 2, 2, &mut rng).unwrap();
            assert!(!ep.targets.contains(&"B".to_string()));
        }
        // Only one eligible relation remains if k is too large.
        let err = sample_episode_realistic(&ds, Section::Test, 2, 5, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Sampling(_)));
    }

    #[test]
    fn fixed_nota_extremes() {
        let ds = dataset_with_test_section(&[("A", 4), ("B", 4), ("C", 4)], 0);
        let mut rng = rng::seeded(5);
        for _ in 0..300 {
            let ep = sample_episode_fixed_nota(&ds, Section::Test, 2, 1, 1.0, &mut rng).unwrap();
            assert!(matches!(ep.gold, LabelId::Named(ref name) if ep.targets.contains(name)));
        }
        for _ in 0..300 {
            let ep = sample_episode_fixed_nota(&ds, Section::Test, 2, 1, 0.0, &mut rng).unwrap();
            assert_eq!(ep.gold, LabelId::Nota);
        }
    }

    #[test]
    fn fixed_nota_needs_out_of_target_relations() {
        let ds = dataset_with_test_section(&[("A", 4), ("B", 4)], 3);
        let err =
            sample_episode_fixed_nota(&ds, Section::Test, 2, 1, 0.5, &mut rng::seeded(0)).unwrap_err();
        assert!(matches!(err, Error::Sampling(_)));
        // p = 1 never needs them.
        assert!(sample_episode_fixed_nota(&ds, Section::Test, 2, 1, 1.0, &mut rng::seeded(0)).is_ok());
    }

    #[test]
    fn replicas_are_deterministic_and_independent() {
        let ds = dataset_with_test_section(&[("A", 6), ("B", 6), ("C", 6)], 6);
        let config = SampleConfig::realistic(2, 1, 42, Section::Test);
        let sets1 = sample_eval_replicas(&ds, &config, 50, 3).unwrap();
        let sets2 = sample_eval_replicas(&ds, &config, 50, 3).unwrap();
        assert_eq!(sets1, sets2);
        assert_ne!(sets1[0].episodes, sets1[1].episodes);

        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("r0.jsonl");
        let p2 = dir.path().join("r0-again.jsonl");
        write_episode_set(&sets1[0], &p1, None).unwrap();
        write_episode_set(&sets2[0], &p2, None).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let loaded = read_episode_set(&p1).unwrap();
        assert_eq!(loaded, sets1[0]);
    }

    #[test]
    fn empty_replica_is_valid() {
        let ds = dataset_with_test_section(&[("A", 3), ("B", 3)], 2);
        let config = SampleConfig::realistic(1, 1, 0, Section::Test);
        let sets = sample_eval_replicas(&ds, &config, 0, 1).unwrap();
        assert_eq!(sets.len(), 1);
        assert!(sets[0].episodes.is_empty());
        let stats = episode_stats(&sets);
        assert_eq!(stats.total, 0);
    }

    #[test]
    fn stats_hand_count() {
        let ds = dataset_with_test_section(&[("A", 3), ("B", 3)], 4);
        let mut rng = rng::seeded(1);
        let sampler = EpisodeSampler::new(&ds, Section::Test, 1, 1).unwrap();
        let episodes: Vec<Episode> = (0..10)
            .map(|_| sampler.draw_realistic(&mut rng).unwrap())
            .collect();
        let mut expected: BTreeMap<String, usize> = BTreeMap::new();
        let mut expected_nota = 0usize;
        for ep in &episodes {
            match &ep.gold {
                LabelId::Named(name) => *expected.entry(name.clone()).or_default() += 1,
                LabelId::Nota => expected_nota += 1,
            }
        }
        let set = EpisodeSet {
            config: SampleConfig::realistic(1, 1, 1, Section::Test),
            replica: 0,
            episodes,
        };
        let stats = episode_stats(&[set]);
        assert_eq!(stats.total, 10);
        assert_eq!(stats.per_relation, expected);
        assert_eq!(stats.nota_count, expected_nota);
        let csv = stats.to_csv();
        assert!(csv.starts_with("relation,count,rate\n"));
        assert!(csv.trim_end().ends_with(&format!(
            "NOTA,{expected_nota},{:.6}",
            expected_nota as f64 / 10.0
        )));
    }

    #[test]
    fn all_nota_stats() {
        let ds = dataset_with_test_section(&[("A", 3), ("B", 3)], 4);
        let mut rng = rng::seeded(1);
        let sampler = EpisodeSampler::new(&ds, Section::Test, 1, 1).unwrap();
        let episodes: Vec<Episode> = (0..20)
            .map(|_| sampler.draw_fixed(0.0, &mut rng).unwrap())
            .collect();
        let set = EpisodeSet {
            config: SampleConfig::fixed_nota(1, 1, 0.0, 1, Section::Test),
            replica: 0,
            episodes,
        };
        let stats = episode_stats(&[set]);
        assert_eq!(stats.nota_rate, 1.0);
        assert!(stats.per_relation.is_empty());
    }
}
