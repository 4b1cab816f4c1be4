//! Conversion of a supervised corpus into a few-shot dataset.
//!
//! The transformation picks disjoint relation sets for train/dev/test, keeps
//! the original instance-level section splits, and relabels: instances whose
//! label is outside their section's relation set become NOTA. The original
//! label of every relabeled (or originally NOTA) instance is retained in a
//! provenance map, which later lets evaluation tooling distinguish
//! out-of-section NOTA from original NOTA, and lets supervised-mode training
//! recover eval-category instances from the train section.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{LabelId, RelationInstance, Section, SectionMap, SupervisedCorpus};
use crate::error::{Error, Result};
use crate::rng;
use crate::util::round4;

pub const MANIFEST_FORMAT: &str = "fsrc-manifest";
pub const MANIFEST_VERSION: u32 = 1;

/// Disjoint relation assignment for the three sections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_relations: BTreeSet<String>,
    pub dev_relations: BTreeSet<String>,
    pub test_relations: BTreeSet<String>,
    pub seed: u64,
}

impl SplitPlan {
    pub fn relations(&self, section: Section) -> &BTreeSet<String> {
        match section {
            Section::Train => &self.train_relations,
            Section::Dev => &self.dev_relations,
            Section::Test => &self.test_relations,
        }
    }

    /// The dev ∪ test relation set, used to compare plans for distinctness.
    pub fn eval_relations(&self) -> BTreeSet<String> {
        self.dev_relations
            .union(&self.test_relations)
            .cloned()
            .collect()
    }

    fn validate(&self, corpus: &SupervisedCorpus) -> Result<()> {
        if self.dev_relations.is_empty() || self.test_relations.is_empty() {
            return Err(Error::InvalidSplit(
                "dev and test relation sets must be non-empty".into(),
            ));
        }
        if self.train_relations.is_empty() {
            return Err(Error::InvalidSplit("train relation set is empty".into()));
        }
        let sets = [
            &self.train_relations,
            &self.dev_relations,
            &self.test_relations,
        ];
        for (i, a) in sets.iter().enumerate() {
            for b in sets.iter().skip(i + 1) {
                if a.intersection(b).next().is_some() {
                    return Err(Error::InvalidSplit(
                        "section relation sets overlap".into(),
                    ));
                }
            }
        }
        for set in sets {
            for rel in set.iter() {
                if !corpus.categories().contains(rel) {
                    return Err(Error::InvalidSplit(format!(
                        "relation {rel} not among corpus categories"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Explicit relation lists for reproducing a published split.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PinnedRelations {
    pub test: Vec<String>,
    pub dev: Vec<String>,
}

/// Chooses `m_test` + `m_dev` eval relations (seeded, or pinned); the
/// remaining categories become train relations.
pub fn plan_split(
    corpus: &SupervisedCorpus,
    m_test: usize,
    m_dev: usize,
    seed: u64,
    pinned: Option<&PinnedRelations>,
) -> Result<SplitPlan> {
    let c = corpus.num_categories();
    if m_test == 0 || m_dev == 0 {
        return Err(Error::InvalidSplit(
            "m_test and m_dev must be at least 1".into(),
        ));
    }
    if m_test + m_dev >= c {
        return Err(Error::InvalidSplit(format!(
            "m_test + m_dev = {} leaves no train relations (C = {c})",
            m_test + m_dev
        )));
    }

    let (test, dev): (BTreeSet<String>, BTreeSet<String>) = match pinned {
        Some(pin) => {
            let test: BTreeSet<String> = pin.test.iter().cloned().collect();
            let dev: BTreeSet<String> = pin.dev.iter().cloned().collect();
            if test.len() != pin.test.len() || dev.len() != pin.dev.len() {
                return Err(Error::InvalidSplit("pinned list contains duplicates".into()));
            }
            if test.len() != m_test || dev.len() != m_dev {
                return Err(Error::InvalidSplit(format!(
                    "pinned lists sized {}/{} do not match m_test={m_test}, m_dev={m_dev}",
                    test.len(),
                    dev.len()
                )));
            }
            if test.intersection(&dev).next().is_some() {
                return Err(Error::InvalidSplit("pinned test and dev lists overlap".into()));
            }
            for rel in test.iter().chain(dev.iter()) {
                if !corpus.categories().contains(rel) {
                    return Err(Error::InvalidSplit(format!("pinned relation {rel} unknown")));
                }
            }
            (test, dev)
        }
        None => {
            let mut cats: Vec<&String> = corpus.categories().iter().collect();
            let mut rng = rng::seeded(seed);
            cats.shuffle(&mut rng);
            let test = cats[..m_test].iter().map(|s| (*s).clone()).collect();
            let dev = cats[m_test..m_test + m_dev]
                .iter()
                .map(|s| (*s).clone())
                .collect();
            (test, dev)
        }
    };

    let train: BTreeSet<String> = corpus
        .categories()
        .iter()
        .filter(|cat| !test.contains(*cat) && !dev.contains(*cat))
        .cloned()
        .collect();
    let plan = SplitPlan {
        train_relations: train,
        dev_relations: dev,
        test_relations: test,
        seed,
    };
    plan.validate(corpus)?;
    Ok(plan)
}

/// Draws `k_splits` plans whose eval (dev ∪ test) relation sets are pairwise
/// distinct. Attempt `i` uses seed `seed + i`, so the first plan equals
/// `plan_split(corpus, m_test, m_dev, seed, None)`.
pub fn plan_multiple_splits(
    corpus: &SupervisedCorpus,
    m_test: usize,
    m_dev: usize,
    k_splits: usize,
    seed: u64,
) -> Result<Vec<SplitPlan>> {
    if k_splits == 0 {
        return Err(Error::InvalidSplit("k_splits must be at least 1".into()));
    }
    let c = corpus.num_categories();
    if !binomial_at_least(c, m_test + m_dev, k_splits as u128) {
        return Err(Error::InvalidSplit(format!(
            "cannot produce {k_splits} distinct eval sets: C({c},{}) is smaller",
            m_test + m_dev
        )));
    }
    let mut plans: Vec<SplitPlan> = Vec::with_capacity(k_splits);
    let mut seen: BTreeSet<BTreeSet<String>> = BTreeSet::new();
    let mut attempt: u64 = 0;
    let max_attempts = 10_000 + 200 * k_splits as u64;
    while plans.len() < k_splits {
        if attempt >= max_attempts {
            return Err(Error::InvalidSplit(format!(
                "gave up after {attempt} attempts to draw {k_splits} distinct eval sets"
            )));
        }
        let plan = plan_split(corpus, m_test, m_dev, seed.wrapping_add(attempt), None)?;
        attempt += 1;
        if seen.insert(plan.eval_relations()) {
            plans.push(plan);
        }
    }
    Ok(plans)
}

/// True when C(n, k) >= limit, evaluated without overflow.
fn binomial_at_least(n: usize, k: usize, limit: u128) -> bool {
    if k > n {
        return 0 >= limit;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return true,
        };
        if acc >= limit {
            return true;
        }
    }
    acc >= limit
}

/// The relabeled corpus: same instances and sections, disjoint label sets,
/// with pre-relabeling labels of all NOTA instances kept in `provenance`.
#[derive(Debug, Clone, PartialEq)]
pub struct FewShotDataset {
    pub sections: SectionMap<Vec<RelationInstance>>,
    pub plan: SplitPlan,
    /// id -> original label, for every instance now labeled NOTA.
    pub provenance: BTreeMap<String, LabelId>,
}

impl FewShotDataset {
    pub fn section(&self, section: Section) -> &[RelationInstance] {
        self.sections.get(section)
    }

    pub fn relations(&self, section: Section) -> &BTreeSet<String> {
        self.plan.relations(section)
    }

    /// True when the relabeling preserved at least one original NOTA instance.
    pub fn has_original_nota(&self) -> bool {
        self.provenance.values().any(|l| l.is_nota())
    }
}

/// Relabels each section against the plan's relation sets.
pub fn apply_split(corpus: &SupervisedCorpus, plan: &SplitPlan) -> Result<FewShotDataset> {
    plan.validate(corpus)?;
    let mut provenance = BTreeMap::new();
    let sections = corpus.sections().map(|section, instances| {
        let keep = plan.relations(section);
        instances
            .iter()
            .map(|inst| {
                let mut out = inst.clone();
                let in_section_set = match &inst.label {
                    LabelId::Named(name) => keep.contains(name),
                    LabelId::Nota => false,
                };
                if !in_section_set {
                    provenance.insert(inst.id.clone(), inst.label.clone());
                    out.label = LabelId::Nota;
                }
                out
            })
            .collect()
    });
    Ok(FewShotDataset {
        sections,
        plan: plan.clone(),
        provenance,
    })
}

/// Per-section counts and NOTA rate (rate reported to 4 decimals).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionStats {
    pub instances: usize,
    pub per_relation: BTreeMap<String, usize>,
    pub nota_count: usize,
    pub nota_rate: f64,
}

pub type SplitStats = SectionMap<SectionStats>;

pub fn split_stats(ds: &FewShotDataset) -> SplitStats {
    ds.sections.map(|_, instances| {
        let mut per_relation: BTreeMap<String, usize> = BTreeMap::new();
        let mut nota_count = 0usize;
        for inst in instances {
            match &inst.label {
                LabelId::Named(name) => *per_relation.entry(name.clone()).or_default() += 1,
                LabelId::Nota => nota_count += 1,
            }
        }
        let instances_total = instances.len();
        let nota_rate = if instances_total == 0 {
            0.0
        } else {
            round4(nota_count as f64 / instances_total as f64)
        };
        SectionStats {
            instances: instances_total,
            per_relation,
            nota_count,
            nota_rate,
        }
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub plan: SplitPlan,
    pub counts: SectionMap<usize>,
    pub nota_rates: SectionMap<f64>,
    pub has_original_nota: bool,
    pub source_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl DatasetManifest {
    pub fn new(ds: &FewShotDataset, source_hash: String) -> DatasetManifest {
        let stats = split_stats(ds);
        DatasetManifest {
            format: MANIFEST_FORMAT.to_string(),
            version: MANIFEST_VERSION,
            plan: ds.plan.clone(),
            counts: stats.map(|_, s| s.instances),
            nota_rates: stats.map(|_, s| s.nota_rate),
            has_original_nota: ds.has_original_nota(),
            source_hash,
            config_hash: None,
        }
    }
}

fn write_section_file(
    path: &Path,
    relations: &BTreeSet<String>,
    instances: &[RelationInstance],
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let header = serde_json::json!({
        "format": crate::corpus::NATIVE_FORMAT,
        "version": crate::corpus::NATIVE_VERSION,
        "categories": relations.iter().collect::<Vec<_>>(),
    });
    (|| -> std::io::Result<()> {
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for inst in instances {
            serde_json::to_writer(&mut out, inst)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

fn read_section_file(path: &Path) -> Result<Vec<RelationInstance>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if idx == 0 || line.trim().is_empty() {
            continue;
        }
        let inst: RelationInstance = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
        inst.validate()?;
        out.push(inst);
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct ProvenanceLine<'a> {
    id: &'a str,
    original: LabelId,
}

/// Writes a dataset directory: three native-jsonl section files, the
/// manifest, and the provenance map.
pub fn save_dataset(
    ds: &FewShotDataset,
    dir: &Path,
    source_hash: String,
    config_hash: Option<String>,
) -> Result<DatasetManifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for section in Section::ALL {
        let path = dir.join(format!("{}.jsonl", section.name()));
        write_section_file(&path, ds.relations(section), ds.section(section))?;
    }
    let prov_path = dir.join("provenance.jsonl");
    let file = File::create(&prov_path).map_err(|e| Error::io(&prov_path, e))?;
    let mut out = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        for (id, original) in &ds.provenance {
            let line = ProvenanceLine {
                id,
                original: original.clone(),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    })()
    .map_err(|e| Error::io(&prov_path, e))?;

    let mut manifest = DatasetManifest::new(ds, source_hash);
    manifest.config_hash = config_hash;
    let manifest_path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialization");
    std::fs::write(&manifest_path, text + "\n").map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest)
}

/// Loads a dataset directory written by [`save_dataset`].
pub fn load_dataset(dir: &Path) -> Result<FewShotDataset> {
    let manifest_path = dir.join("manifest.json");
    let text =
        std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)
        .map_err(|e| Error::parse(&manifest_path, 1, e.to_string()))?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(Error::parse(
            &manifest_path,
            1,
            format!("unexpected manifest format {:?}", manifest.format),
        ));
    }

    let mut sections: SectionMap<Vec<RelationInstance>> = SectionMap::default();
    for section in Section::ALL {
        let path = dir.join(format!("{}.jsonl", section.name()));
        let instances = read_section_file(&path)?;
        let allowed = manifest.plan.relations(section);
        for inst in &instances {
            if let LabelId::Named(name) = &inst.label {
                if !allowed.contains(name) {
                    return Err(Error::parse(
                        &path,
                        0,
                        format!(
                            "instance {}: label {name} not in the {section} relation set",
                            inst.id
                        ),
                    ));
                }
            }
        }
        *sections.get_mut(section) = instances;
    }

    let prov_path = dir.join("provenance.jsonl");
    let mut provenance = BTreeMap::new();
    if prov_path.exists() {
        let file = File::open(&prov_path).map_err(|e| Error::io(&prov_path, e))?;
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&prov_path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            #[derive(Deserialize)]
            struct Owned {
                id: String,
                original: LabelId,
            }
            let rec: Owned = serde_json::from_str(&line)
                .map_err(|e| Error::parse(&prov_path, idx + 1, e.to_string()))?;
            provenance.insert(rec.id, rec.original);
        }
    }

    Ok(FewShotDataset {
        sections,
        plan: manifest.plan,
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Span;

    /// Synthetic corpus: `relations_per_section[i]` instances of relation
    /// `rel_i` in each section, plus `nota_per_section` original NOTA.
    pub(crate) fn synthetic_corpus(
        num_relations: usize,
        per_relation_per_section: usize,
        nota_per_section: usize,
    ) -> SupervisedCorpus {
        let mut sections: SectionMap<Vec<RelationInstance>> = SectionMap::default();
        for section in Section::ALL {
            let bucket = sections.get_mut(section);
            for rel in 0..num_relations {
                for i in 0..per_relation_per_section {
                    bucket.push(mk(
                        &format!("{}-r{rel}-{i}", section.name()),
                        &format!("rel_{rel:02}"),
                    ));
                }
            }
            for i in 0..nota_per_section {
                bucket.push(mk(&format!("{}-nota-{i}", section.name()), "NOTA"));
            }
        }
        let categories = (0..num_relations).map(|r| format!("rel_{r:02}")).collect();
        SupervisedCorpus::new(sections, categories).unwrap()
    }

    fn mk(id: &str, label: &str) -> RelationInstance {
        RelationInstance {
            id: id.to_string(),
            tokens: vec!["w0".into(), "w1".into(), "w2".into(), "w3".into()],
            e1_span: Span::new(0, 1),
            e2_span: Span::new(2, 3),
            label: LabelId::from_raw(label),
        }
    }

    #[test]
    fn tacred_shaped_split_counts() {
        let corpus = synthetic_corpus(41, 2, 1);
        let plan = plan_split(&corpus, 10, 6, 7, None).unwrap();
        assert_eq!(plan.test_relations.len(), 10);
        assert_eq!(plan.dev_relations.len(), 6);
        assert_eq!(plan.train_relations.len(), 25);
    }

    #[test]
    fn full_eval_split_rejected() {
        let corpus = synthetic_corpus(6, 2, 0);
        let err = plan_split(&corpus, 4, 2, 7, None).unwrap_err();
        assert!(matches!(err, Error::InvalidSplit(_)));
    }

    #[test]
    fn plan_is_deterministic() {
        let corpus = synthetic_corpus(12, 2, 1);
        let a = plan_split(&corpus, 3, 2, 99, None).unwrap();
        let b = plan_split(&corpus, 3, 2, 99, None).unwrap();
        assert_eq!(a, b);
        let c = plan_split(&corpus, 3, 2, 100, None).unwrap();
        assert_ne!(a.eval_relations(), c.eval_relations());
    }

    #[test]
    fn pinned_split_respected() {
        let corpus = synthetic_corpus(6, 2, 0);
        let pin = PinnedRelations {
            test: vec!["rel_00".into(), "rel_01".into()],
            dev: vec!["rel_02".into()],
        };
        let plan = plan_split(&corpus, 2, 1, 0, Some(&pin)).unwrap();
        assert!(plan.test_relations.contains("rel_00"));
        assert!(plan.dev_relations.contains("rel_02"));
        assert_eq!(plan.train_relations.len(), 3);

        let overlapping = PinnedRelations {
            test: vec!["rel_00".into()],
            dev: vec!["rel_00".into()],
        };
        assert!(plan_split(&corpus, 1, 1, 0, Some(&overlapping)).is_err());
        let unknown = PinnedRelations {
            test: vec!["nope".into()],
            dev: vec!["rel_02".into()],
        };
        assert!(plan_split(&corpus, 1, 1, 0, Some(&unknown)).is_err());
    }

    #[test]
    fn relabeling_and_provenance() {
        let corpus = synthetic_corpus(5, 2, 1);
        let pin = PinnedRelations {
            test: vec!["rel_00".into()],
            dev: vec!["rel_01".into()],
        };
        let plan = plan_split(&corpus, 1, 1, 0, Some(&pin)).unwrap();
        let ds = apply_split(&corpus, &plan).unwrap();

        // A train-section instance of a test relation became NOTA, with its
        // original label retained.
        let moved = ds
            .section(Section::Train)
            .iter()
            .find(|i| i.id == "train-r0-0")
            .unwrap();
        assert_eq!(moved.label, LabelId::Nota);
        assert_eq!(
            ds.provenance.get("train-r0-0"),
            Some(&LabelId::Named("rel_00".into()))
        );

        // Original NOTA stays NOTA with NOTA provenance.
        assert_eq!(ds.provenance.get("train-nota-0"), Some(&LabelId::Nota));

        // Counts are conserved and in-section labels kept.
        for section in Section::ALL {
            assert_eq!(ds.section(section).len(), corpus.section(section).len());
        }
        let kept = ds
            .section(Section::Test)
            .iter()
            .find(|i| i.id == "test-r0-0")
            .unwrap();
        assert_eq!(kept.label, LabelId::Named("rel_00".into()));
    }

    #[test]
    fn multiple_splits_distinct_eval_sets() {
        let corpus = synthetic_corpus(41, 1, 0);
        let plans = plan_multiple_splits(&corpus, 10, 6, 3, 7).unwrap();
        assert_eq!(plans.len(), 3);
        for i in 0..plans.len() {
            for j in i + 1..plans.len() {
                assert_ne!(plans[i].eval_relations(), plans[j].eval_relations());
            }
        }
        // First plan matches the single-split call.
        assert_eq!(plans[0], plan_split(&corpus, 10, 6, 7, None).unwrap());
    }

    #[test]
    fn pigeonhole_rejects_impossible_k() {
        let corpus = synthetic_corpus(4, 1, 0);
        // C(4,2) = 6 but only 3 valid (train non-empty is separate); ask for 7.
        let err = plan_multiple_splits(&corpus, 1, 1, 7, 0).unwrap_err();
        assert!(matches!(err, Error::InvalidSplit(_)));
    }

    #[test]
    fn stats_rates() {
        let corpus = synthetic_corpus(4, 1, 3);
        let pin = PinnedRelations {
            test: vec!["rel_00".into()],
            dev: vec!["rel_01".into()],
        };
        let plan = plan_split(&corpus, 1, 1, 0, Some(&pin)).unwrap();
        let ds = apply_split(&corpus, &plan).unwrap();
        let stats = split_stats(&ds);
        // Each section: 4 relation instances + 3 NOTA = 7 total.
        // Test keeps rel_00 only -> 3 relabeled + 3 original NOTA = 6/7.
        assert_eq!(stats.test.instances, 7);
        assert_eq!(stats.test.nota_count, 6);
        assert_eq!(stats.test.nota_rate, round4(6.0 / 7.0));
        assert_eq!(stats.test.per_relation.get("rel_00"), Some(&1));
        // Train keeps rel_02, rel_03 -> 2 named, 5 NOTA.
        assert_eq!(stats.train.nota_count, 5);
    }

    #[test]
    fn all_nota_section_rate_is_one() {
        // No instances of the kept relation in the section: everything NOTA.
        let mut sections: SectionMap<Vec<RelationInstance>> = SectionMap::default();
        sections.train.push(mk("tr-1", "keep"));
        sections.train.push(mk("tr-2", "other1"));
        sections.dev.push(mk("dv-1", "other1"));
        sections.dev.push(mk("dv-2", "other2"));
        sections.test.push(mk("te-1", "other2"));
        let corpus = SupervisedCorpus::new(
            sections,
            ["keep", "other1", "other2"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        )
        .unwrap();
        let pin = PinnedRelations {
            test: vec!["other2".into()],
            dev: vec!["other1".into()],
        };
        let plan = plan_split(&corpus, 1, 1, 0, Some(&pin)).unwrap();
        let ds = apply_split(&corpus, &plan).unwrap();
        let stats = split_stats(&ds);
        assert_eq!(stats.test.nota_rate, 0.0); // te-1 is other2, kept
        // Train keeps "keep": tr-2 relabeled -> rate 0.5.
        assert_eq!(stats.train.nota_rate, 0.5);
        // Dev keeps other1: dv-2 relabeled -> 0.5; now make an all-NOTA case.
        let pin2 = PinnedRelations {
            test: vec!["keep".into()],
            dev: vec!["other1".into()],
        };
        let plan2 = plan_split(&corpus, 1, 1, 0, Some(&pin2)).unwrap();
        let ds2 = apply_split(&corpus, &plan2).unwrap();
        let stats2 = split_stats(&ds2);
        assert_eq!(stats2.test.nota_rate, 1.0); // te-1 is other2 -> NOTA
    }

    #[test]
    fn dataset_round_trip_and_determinism() {
        let corpus = synthetic_corpus(6, 2, 1);
        let plan = plan_split(&corpus, 2, 1, 3, None).unwrap();
        let ds = apply_split(&corpus, &plan).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let d1 = dir.path().join("a");
        let d2 = dir.path().join("b");
        save_dataset(&ds, &d1, corpus.content_hash(), None).unwrap();
        save_dataset(&ds, &d2, corpus.content_hash(), None).unwrap();
        for name in ["train.jsonl", "dev.jsonl", "test.jsonl", "manifest.json", "provenance.jsonl"] {
            let a = std::fs::read(d1.join(name)).unwrap();
            let b = std::fs::read(d2.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical saves");
        }
        let loaded = load_dataset(&d1).unwrap();
        assert_eq!(loaded, ds);
    }
}
