//! Data model and ingestion for supervised relation classification corpora
//! and precomputed embedding stores.
//!
//! Three input schemas are supported:
//! - `tacred-json`: TACRED-style records (`token`, `subj_start`/`subj_end`,
//!   `obj_start`/`obj_end` inclusive indices, `relation`), either a JSON array
//!   or JSONL. A directory containing `train.json`, `dev.json`, `test.json`
//!   populates the three sections; a single file may carry a per-record
//!   `section` field (default: train).
//! - `fewrel-json`: FewRel-style `{relation: [instances]}` maps with `h`/`t`
//!   entity descriptors. Directory or single-file handling as above
//!   (`val.json` is accepted for the dev section).
//! - `native-jsonl`: this crate's own format. First line is a header record
//!   `{"format":"fsrc-corpus","version":1,"categories":[...]}`, then one
//!   instance object per line.
//!
//! The reserved none-of-the-above spellings `no_relation`, `NA` and `NOTA`
//! (case-insensitive) are folded into [`LabelId::Nota`] at ingestion, so no
//! instance ever carries a raw reserved string as a named label.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NATIVE_FORMAT: &str = "fsrc-corpus";
pub const NATIVE_VERSION: u32 = 1;

/// Relation label: a named category or the none-of-the-above class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LabelId {
    Named(String),
    Nota,
}

impl LabelId {
    /// Maps a raw label string, folding the reserved NOTA spellings.
    pub fn from_raw(raw: &str) -> LabelId {
        if is_reserved_nota(raw) {
            LabelId::Nota
        } else {
            LabelId::Named(raw.to_string())
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            LabelId::Named(name) => name,
            LabelId::Nota => "NOTA",
        }
    }

    pub fn is_nota(&self) -> bool {
        matches!(self, LabelId::Nota)
    }

    pub fn named(&self) -> Option<&str> {
        match self {
            LabelId::Named(name) => Some(name),
            LabelId::Nota => None,
        }
    }
}

impl fmt::Display for LabelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn is_reserved_nota(raw: &str) -> bool {
    raw.eq_ignore_ascii_case("nota")
        || raw.eq_ignore_ascii_case("no_relation")
        || raw.eq_ignore_ascii_case("na")
}

impl Serialize for LabelId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for LabelId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Ok(LabelId::from_raw(&raw))
    }
}

/// Half-open token index range, serialized as `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Span {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl From<(usize, usize)> for Span {
    fn from((start, end): (usize, usize)) -> Span {
        Span { start, end }
    }
}

impl From<Span> for (usize, usize) {
    fn from(span: Span) -> (usize, usize) {
        (span.start, span.end)
    }
}

/// One sentence with two ordered entity argument spans and a gold label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationInstance {
    pub id: String,
    pub tokens: Vec<String>,
    #[serde(rename = "e1")]
    pub e1_span: Span,
    #[serde(rename = "e2")]
    pub e2_span: Span,
    pub label: LabelId,
}

impl RelationInstance {
    /// Checks the span invariants: in bounds, non-empty, non-overlapping.
    pub fn validate(&self) -> Result<()> {
        for span in [&self.e1_span, &self.e2_span] {
            if span.is_empty() || span.end > self.tokens.len() {
                return Err(Error::SpanOutOfBounds {
                    id: self.id.clone(),
                });
            }
        }
        if self.e1_span.overlaps(&self.e2_span) {
            return Err(Error::SpanOverlap {
                id: self.id.clone(),
            });
        }
        Ok(())
    }
}

/// Corpus section. Both supervised corpora and few-shot datasets keep the
/// train/dev/test structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Section {
    Train,
    Dev,
    Test,
}

impl Section {
    pub const ALL: [Section; 3] = [Section::Train, Section::Dev, Section::Test];

    pub fn name(&self) -> &'static str {
        match self {
            Section::Train => "train",
            Section::Dev => "dev",
            Section::Test => "test",
        }
    }

    pub fn parse(name: &str) -> Option<Section> {
        match name.to_ascii_lowercase().as_str() {
            "train" => Some(Section::Train),
            "dev" | "val" | "validation" => Some(Section::Dev),
            "test" => Some(Section::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-section container used by corpora, datasets and their statistics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SectionMap<T> {
    pub train: T,
    pub dev: T,
    pub test: T,
}

impl<T> SectionMap<T> {
    pub fn get(&self, section: Section) -> &T {
        match section {
            Section::Train => &self.train,
            Section::Dev => &self.dev,
            Section::Test => &self.test,
        }
    }

    pub fn get_mut(&mut self, section: Section) -> &mut T {
        match section {
            Section::Train => &mut self.train,
            Section::Dev => &mut self.dev,
            Section::Test => &mut self.test,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Section, &T)> {
        Section::ALL.iter().map(move |&s| (s, self.get(s)))
    }

    pub fn map<U>(&self, mut f: impl FnMut(Section, &T) -> U) -> SectionMap<U> {
        SectionMap {
            train: f(Section::Train, &self.train),
            dev: f(Section::Dev, &self.dev),
            test: f(Section::Test, &self.test),
        }
    }
}

/// A validated supervised corpus: three instance sections plus the category
/// inventory. Sections are kept id-sorted so serialization is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedCorpus {
    sections: SectionMap<Vec<RelationInstance>>,
    categories: BTreeSet<String>,
}

impl SupervisedCorpus {
    /// Validates and canonicalizes raw sections. `categories` may name more
    /// relations than appear in the data but never fewer.
    pub fn new(
        mut sections: SectionMap<Vec<RelationInstance>>,
        categories: BTreeSet<String>,
    ) -> Result<SupervisedCorpus> {
        let mut seen: HashSet<&str> = HashSet::new();
        for (_, instances) in sections.iter() {
            for inst in instances {
                inst.validate()?;
                if let LabelId::Named(name) = &inst.label {
                    if !categories.contains(name) {
                        return Err(Error::Parse {
                            path: String::new(),
                            line: 0,
                            msg: format!("instance {}: label {name} not in categories", inst.id),
                        });
                    }
                }
            }
        }
        for (_, instances) in sections.iter() {
            for inst in instances {
                if !seen.insert(inst.id.as_str()) {
                    return Err(Error::DuplicateId {
                        id: inst.id.clone(),
                    });
                }
            }
        }
        for section in Section::ALL {
            sections
                .get_mut(section)
                .sort_by(|a, b| a.id.cmp(&b.id));
        }
        Ok(SupervisedCorpus {
            sections,
            categories,
        })
    }

    pub fn section(&self, section: Section) -> &[RelationInstance] {
        self.sections.get(section)
    }

    pub fn sections(&self) -> &SectionMap<Vec<RelationInstance>> {
        &self.sections
    }

    pub fn categories(&self) -> &BTreeSet<String> {
        &self.categories
    }

    pub fn num_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn len(&self) -> usize {
        Section::ALL.iter().map(|&s| self.section(s).len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when any section carries an original NOTA instance.
    pub fn has_nota_instances(&self) -> bool {
        self.sections
            .iter()
            .any(|(_, v)| v.iter().any(|i| i.label.is_nota()))
    }

    /// Serializes the corpus in native-jsonl form.
    pub fn write_native<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header = NativeHeader {
            format: NATIVE_FORMAT.to_string(),
            version: NATIVE_VERSION,
            categories: self.categories.iter().cloned().collect(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for section in Section::ALL {
            for inst in self.section(section) {
                let line = NativeLine {
                    id: &inst.id,
                    section,
                    tokens: &inst.tokens,
                    e1: inst.e1_span,
                    e2: inst.e2_span,
                    label: &inst.label,
                };
                serde_json::to_writer(&mut out, &line)?;
                out.write_all(b"\n")?;
            }
        }
        Ok(())
    }

    /// SHA-256 of the native serialization; used to stamp derived artifacts.
    pub fn content_hash(&self) -> String {
        let mut buf = Vec::new();
        self.write_native(&mut buf).expect("in-memory write");
        crate::util::sha256_hex(&buf)
    }
}

#[derive(Serialize, Deserialize)]
struct NativeHeader {
    format: String,
    version: u32,
    categories: Vec<String>,
}

#[derive(Serialize)]
struct NativeLine<'a> {
    id: &'a str,
    section: Section,
    tokens: &'a [String],
    e1: Span,
    e2: Span,
    label: &'a LabelId,
}

#[derive(Deserialize)]
struct NativeLineOwned {
    id: String,
    section: Section,
    tokens: Vec<String>,
    e1: Span,
    e2: Span,
    label: LabelId,
}

/// Input schema accepted by [`load_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusSchema {
    TacredJson,
    FewrelJson,
    NativeJsonl,
}

impl CorpusSchema {
    pub fn parse(name: &str) -> Option<CorpusSchema> {
        match name.to_ascii_lowercase().as_str() {
            "tacred" | "tacred-json" => Some(CorpusSchema::TacredJson),
            "fewrel" | "fewrel-json" => Some(CorpusSchema::FewrelJson),
            "native" | "native-jsonl" => Some(CorpusSchema::NativeJsonl),
            _ => None,
        }
    }
}

/// Loads and validates a supervised corpus.
pub fn load_corpus(path: &Path, schema: CorpusSchema) -> Result<SupervisedCorpus> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        ));
    }
    let mut sections: SectionMap<Vec<RelationInstance>> = SectionMap::default();
    let mut header_categories: Option<BTreeSet<String>> = None;

    match schema {
        CorpusSchema::NativeJsonl => {
            header_categories = Some(load_native(path, &mut sections)?);
        }
        CorpusSchema::TacredJson => {
            for (file, default_section) in section_files(path)? {
                load_tacred(&file, default_section, &mut sections)?;
            }
        }
        CorpusSchema::FewrelJson => {
            for (file, default_section) in section_files(path)? {
                load_fewrel(&file, default_section, &mut sections)?;
            }
        }
    }

    let categories = match header_categories {
        Some(cats) => cats,
        None => observed_categories(&sections),
    };
    SupervisedCorpus::new(sections, categories)
}

/// Writes the corpus as native-jsonl: a header record, then one instance per
/// line in section order (train, dev, test), id-sorted within each section.
pub fn save_corpus(corpus: &SupervisedCorpus, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    corpus
        .write_native(&mut out)
        .map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

fn observed_categories(sections: &SectionMap<Vec<RelationInstance>>) -> BTreeSet<String> {
    let mut cats = BTreeSet::new();
    for (_, instances) in sections.iter() {
        for inst in instances {
            if let LabelId::Named(name) = &inst.label {
                cats.insert(name.clone());
            }
        }
    }
    cats
}

/// Resolves a corpus path to `(file, default_section)` pairs. A directory is
/// expected to contain per-section files; a single file lands in `None`
/// (records may still carry their own `section` field).
fn section_files(path: &Path) -> Result<Vec<(std::path::PathBuf, Option<Section>)>> {
    if path.is_dir() {
        let mut found = Vec::new();
        for section in Section::ALL {
            let stems: &[&str] = match section {
                Section::Dev => &["dev", "val"],
                Section::Train => &["train"],
                Section::Test => &["test"],
            };
            for stem in stems {
                for ext in ["json", "jsonl"] {
                    let candidate = path.join(format!("{stem}.{ext}"));
                    if candidate.is_file() {
                        found.push((candidate, Some(section)));
                    }
                }
            }
        }
        if found.is_empty() {
            return Err(Error::parse(
                path,
                0,
                "directory contains no train/dev/test corpus files",
            ));
        }
        Ok(found)
    } else {
        Ok(vec![(path.to_path_buf(), None)])
    }
}

fn load_native(path: &Path, sections: &mut SectionMap<Vec<RelationInstance>>) -> Result<BTreeSet<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut categories = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if idx == 0 {
            let header: NativeHeader = serde_json::from_str(&line)
                .map_err(|e| Error::parse(path, lineno, format!("bad header: {e}")))?;
            if header.format != NATIVE_FORMAT {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("unexpected format tag {:?}", header.format),
                ));
            }
            categories = Some(header.categories.into_iter().collect());
            continue;
        }
        let record: NativeLineOwned = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        sections.get_mut(record.section).push(RelationInstance {
            id: record.id,
            tokens: record.tokens,
            e1_span: record.e1,
            e2_span: record.e2,
            label: record.label,
        });
    }
    categories.ok_or_else(|| Error::parse(path, 1, "missing fsrc-corpus header record"))
}

#[derive(Deserialize)]
struct TacredRecord {
    id: String,
    #[serde(alias = "tokens")]
    token: Vec<String>,
    subj_start: usize,
    subj_end: usize,
    obj_start: usize,
    obj_end: usize,
    relation: String,
    #[serde(default)]
    section: Option<String>,
}

fn tacred_to_instance(rec: TacredRecord) -> RelationInstance {
    RelationInstance {
        id: rec.id,
        tokens: rec.token,
        // TACRED span indices are inclusive; ours are half-open.
        e1_span: Span::new(rec.subj_start, rec.subj_end + 1),
        e2_span: Span::new(rec.obj_start, rec.obj_end + 1),
        label: LabelId::from_raw(&rec.relation),
    }
}

fn load_tacred(
    path: &Path,
    default_section: Option<Section>,
    sections: &mut SectionMap<Vec<RelationInstance>>,
) -> Result<()> {
    let records: Vec<(usize, TacredRecord)> = read_records(path)?;
    for (lineno, rec) in records {
        let section = resolve_section(path, lineno, rec.section.as_deref(), default_section)?;
        sections.get_mut(section).push(tacred_to_instance(rec));
    }
    Ok(())
}

/// Reads either a JSON array of records or JSONL, tagging each record with a
/// line number for error reporting (array records all report line 1).
fn read_records<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let mut text = String::new();
    File::open(path)
        .map_err(|e| Error::io(path, e))?
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path, e))?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        let records: Vec<T> = serde_json::from_str(trimmed)
            .map_err(|e| Error::parse(path, 1, e.to_string()))?;
        Ok(records.into_iter().map(|r| (1, r)).collect())
    } else {
        let mut out = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: T = serde_json::from_str(line)
                .map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
            out.push((idx + 1, rec));
        }
        Ok(out)
    }
}

fn resolve_section(
    path: &Path,
    lineno: usize,
    record_section: Option<&str>,
    default_section: Option<Section>,
) -> Result<Section> {
    match record_section {
        Some(name) => Section::parse(name)
            .ok_or_else(|| Error::parse(path, lineno, format!("unknown section {name:?}"))),
        None => Ok(default_section.unwrap_or(Section::Train)),
    }
}

fn load_fewrel(
    path: &Path,
    default_section: Option<Section>,
    sections: &mut SectionMap<Vec<RelationInstance>>,
) -> Result<()> {
    let mut text = String::new();
    File::open(path)
        .map_err(|e| Error::io(path, e))?
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, 1, e.to_string()))?;
    let map = value
        .as_object()
        .ok_or_else(|| Error::parse(path, 1, "expected a {relation: [instances]} object"))?;
    let section = default_section.unwrap_or(Section::Train);
    // Sorted relation order keeps generated ids stable across runs.
    let mut relations: Vec<&String> = map.keys().collect();
    relations.sort();
    for relation in relations {
        let list = map[relation]
            .as_array()
            .ok_or_else(|| Error::parse(path, 1, format!("relation {relation}: expected a list")))?;
        for (i, item) in list.iter().enumerate() {
            let inst = fewrel_instance(path, relation, i, item)?;
            sections.get_mut(section).push(inst);
        }
    }
    Ok(())
}

fn fewrel_instance(
    path: &Path,
    relation: &str,
    index: usize,
    item: &serde_json::Value,
) -> Result<RelationInstance> {
    let bad = |msg: String| Error::parse(path, 1, format!("{relation}[{index}]: {msg}"));
    let tokens: Vec<String> = item
        .get("tokens")
        .and_then(|t| t.as_array())
        .ok_or_else(|| bad("missing tokens".into()))?
        .iter()
        .map(|v| v.as_str().unwrap_or_default().to_string())
        .collect();
    let span_of = |key: &str| -> Result<Span> {
        // FewRel entity descriptor: [surface, kb_id, [[token indices...]]]
        let positions = item
            .get(key)
            .and_then(|e| e.as_array())
            .and_then(|e| e.get(2))
            .and_then(|p| p.as_array())
            .and_then(|p| p.first())
            .and_then(|p| p.as_array())
            .ok_or_else(|| bad(format!("missing {key} position list")))?;
        let idxs: Vec<usize> = positions
            .iter()
            .filter_map(|v| v.as_u64().map(|u| u as usize))
            .collect();
        if idxs.is_empty() {
            return Err(bad(format!("empty {key} position list")));
        }
        let lo = *idxs.iter().min().unwrap();
        let hi = *idxs.iter().max().unwrap();
        Ok(Span::new(lo, hi + 1))
    };
    Ok(RelationInstance {
        id: format!("{relation}#{index}"),
        tokens,
        e1_span: span_of("h")?,
        e2_span: span_of("t")?,
        label: LabelId::from_raw(relation),
    })
}

/// Precomputed instance embeddings keyed by instance id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> EmbeddingStore {
        EmbeddingStore {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(|v| v.as_slice())
    }

    pub fn insert(&mut self, id: String, vec: Vec<f64>) -> Result<()> {
        if vec.len() != self.dim {
            return Err(Error::EmbeddingDimension {
                id,
                expected: self.dim,
                found: vec.len(),
            });
        }
        if vec.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { id });
        }
        if self.vectors.contains_key(&id) {
            return Err(Error::DuplicateId { id });
        }
        self.vectors.insert(id, vec);
        Ok(())
    }
}

#[derive(Deserialize)]
struct EmbeddingRecord {
    id: String,
    vec: Vec<f64>,
}

/// Loads a JSONL embedding store of `{"id": ..., "vec": [...]}` records.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingStore> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut store: Option<EmbeddingStore> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EmbeddingRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
        let store = store.get_or_insert_with(|| EmbeddingStore::new(record.vec.len()));
        store.insert(record.id, record.vec)?;
    }
    store.ok_or_else(|| Error::parse(path, 0, "embedding file contains no records"))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn inst(id: &str, label: &str) -> RelationInstance {
        RelationInstance {
            id: id.to_string(),
            tokens: vec!["a".into(), "b".into(), "c".into(), "d".into()],
            e1_span: Span::new(0, 1),
            e2_span: Span::new(2, 3),
            label: LabelId::from_raw(label),
        }
    }

    fn corpus_of(train: Vec<RelationInstance>) -> SupervisedCorpus {
        let cats = observed_categories(&SectionMap {
            train: train.clone(),
            dev: vec![],
            test: vec![],
        });
        SupervisedCorpus::new(
            SectionMap {
                train,
                dev: vec![],
                test: vec![],
            },
            cats,
        )
        .unwrap()
    }

    #[test]
    fn reserved_labels_fold_to_nota() {
        assert_eq!(LabelId::from_raw("no_relation"), LabelId::Nota);
        assert_eq!(LabelId::from_raw("NA"), LabelId::Nota);
        assert_eq!(LabelId::from_raw("NoTa"), LabelId::Nota);
        assert_eq!(
            LabelId::from_raw("org:founded"),
            LabelId::Named("org:founded".into())
        );
    }

    #[test]
    fn tacred_no_relation_becomes_nota() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.jsonl");
        let mut f = File::create(&path).unwrap();
        writeln!(
            f,
            r#"{{"id":"t1","token":["Sam","works","at","Acme"],"subj_start":0,"subj_end":0,"obj_start":3,"obj_end":3,"relation":"no_relation"}}"#
        )
        .unwrap();
        writeln!(
            f,
            r#"{{"id":"t2","token":["Sam","works","at","Acme"],"subj_start":0,"subj_end":0,"obj_start":3,"obj_end":3,"relation":"per:employee_of"}}"#
        )
        .unwrap();
        let corpus = load_corpus(&path, CorpusSchema::TacredJson).unwrap();
        let train = corpus.section(Section::Train);
        assert_eq!(train.len(), 2);
        assert_eq!(train[0].label, LabelId::Nota);
        assert_eq!(train[1].label, LabelId::Named("per:employee_of".into()));
        // TACRED inclusive ends map to half-open ranges.
        assert_eq!(train[0].e1_span, Span::new(0, 1));
        assert_eq!(train[0].e2_span, Span::new(3, 4));
        assert_eq!(corpus.num_categories(), 1);
    }

    #[test]
    fn overlapping_spans_rejected() {
        let mut bad = inst("x", "r");
        bad.e2_span = bad.e1_span;
        let err = SupervisedCorpus::new(
            SectionMap {
                train: vec![bad],
                dev: vec![],
                test: vec![],
            },
            ["r".to_string()].into_iter().collect(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::SpanOverlap { id } if id == "x"));
    }

    #[test]
    fn span_out_of_bounds_names_instance() {
        let mut bad = inst("y", "r");
        bad.e2_span = Span::new(3, 9);
        let err = SupervisedCorpus::new(
            SectionMap {
                train: vec![bad],
                dev: vec![],
                test: vec![],
            },
            ["r".to_string()].into_iter().collect(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::SpanOutOfBounds { id } if id == "y"));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = SupervisedCorpus::new(
            SectionMap {
                train: vec![inst("same", "r"), inst("same", "r")],
                dev: vec![],
                test: vec![],
            },
            ["r".to_string()].into_iter().collect(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateId { id } if id == "same"));
    }

    #[test]
    fn native_round_trip_is_identity() {
        let corpus = corpus_of(vec![inst("b", "r1"), inst("a", "r2"), inst("c", "NOTA")]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        save_corpus(&corpus, &path).unwrap();
        let loaded = load_corpus(&path, CorpusSchema::NativeJsonl).unwrap();
        assert_eq!(loaded, corpus);
    }

    #[test]
    fn save_is_id_sorted_with_header() {
        let corpus = corpus_of(vec![inst("z", "r1"), inst("m", "r1"), inst("a", "r1")]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        save_corpus(&corpus, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].contains("\"fsrc-corpus\""));
        let ids: Vec<String> = lines[1..]
            .iter()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["id"]
                .as_str()
                .unwrap()
                .to_string())
            .collect();
        assert_eq!(ids, vec!["a", "m", "z"]);
    }

    #[test]
    fn empty_corpus_saves_header_only() {
        let corpus = corpus_of(vec![]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        save_corpus(&corpus, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        let reloaded = load_corpus(&path, CorpusSchema::NativeJsonl).unwrap();
        assert_eq!(reloaded, corpus);
    }

    #[test]
    fn embeddings_consistent_dim() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vecs.jsonl");
        std::fs::write(
            &path,
            "{\"id\":\"a\",\"vec\":[1.0,2.0,3.0,4.0]}\n{\"id\":\"b\",\"vec\":[0,0,0,1]}\n",
        )
        .unwrap();
        let store = load_embeddings(&path).unwrap();
        assert_eq!(store.dim(), 4);
        assert_eq!(store.len(), 2);
    }

    #[test]
    fn embeddings_dim_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vecs.jsonl");
        std::fs::write(
            &path,
            "{\"id\":\"a\",\"vec\":[1,2,3,4]}\n{\"id\":\"b\",\"vec\":[1,2,3,4,5]}\n",
        )
        .unwrap();
        let err = load_embeddings(&path).unwrap_err();
        assert!(matches!(
            err,
            Error::EmbeddingDimension { expected: 4, found: 5, .. }
        ));
    }

    #[test]
    fn embeddings_nan_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vecs.jsonl");
        std::fs::write(&path, "{\"id\":\"a\",\"vec\":[1,null,3]}\n").unwrap();
        assert!(load_embeddings(&path).is_err());
        std::fs::write(&path, "{\"id\":\"a\",\"vec\":[1,2,1e999]}\n").unwrap();
        assert!(load_embeddings(&path).is_err());
    }

    #[test]
    fn embeddings_duplicate_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vecs.jsonl");
        std::fs::write(
            &path,
            "{\"id\":\"a\",\"vec\":[1,2]}\n{\"id\":\"a\",\"vec\":[3,4]}\n",
        )
        .unwrap();
        let err = load_embeddings(&path).unwrap_err();
        assert!(matches!(err, Error::DuplicateId { id } if id == "a"));
    }
}
