//! Notes, gold annotations, sentence segmentation and per-entity labeling.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::evalkit::{partial_similarity, DEFAULT_MATCH_THRESHOLD};
use crate::text::fold;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
    #[error("{path}:{line}: annotation references unknown note_id {note_id:?}")]
    UnknownNote { path: PathBuf, line: usize, note_id: String },
    #[error("{path}:{line}: unknown entity type {entity:?}")]
    UnknownEntity { path: PathBuf, line: usize, entity: String },
    #[error("{path}:{line}: duplicate note_id {note_id:?}")]
    DuplicateNote { path: PathBuf, line: usize, note_id: String },
    #[error("entity type {0:?} is already registered")]
    DuplicateEntity(String),
    #[error("failed to read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Note {
    pub note_id: String,
    pub text: String,
}

/// A sentence of a note. `char_range` is a half-open byte range into the
/// note text.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sentence {
    pub note_id: String,
    pub index: usize,
    pub text: String,
    pub char_range: (usize, usize),
}

impl Sentence {
    pub fn key(&self) -> SentenceKey {
        SentenceKey { note_id: self.note_id.clone(), index: self.index }
    }
}

/// Identity of a sentence within a corpus.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SentenceKey {
    pub note_id: String,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityType {
    pub name: String,
    pub description: String,
}

const BUILTIN_ENTITIES: [(&str, &str); 19] = [
    ("Age", "Numerical expressions indicating a patient's age, such as '56 y/o,' '25 years old,' or 'infant'."),
    ("Race", "Explicit mentions of a patient's racial group or geographic/physical origin (e.g., 'White,' 'Caucasian,' 'Black,' 'African American,' 'Asian,' 'Chinese')."),
    ("Ethnicity", "Explicit mentions of Hispanic, Latino, or Spanish origin (e.g., 'Hispanic,' 'Latina,' 'Latinx,' 'Mexican-American'), excluding the patient's race."),
    ("Sex", "Explicitly stated gender-related terms, including 'Male,' 'Female,' or 'Transgender'."),
    ("Perio Diagnoses", "Explicit mentions or classification of the patient's periodontal status, strictly limited to three categories: Periodontitis, Gingivitis, or Gingival Health. The diagnosis is typically stated directly (e.g., generalized Stage III Grade B periodontitis), but the term Periodontitis may sometimes be implied by the presence of specific modifiers (Stage or Grade). Gingivitis typically associates with Extent and Subtype, while Gingival Health associates with Subtype only."),
    ("Stage", "Explicit mentions of the severity classification for Periodontitis, denoted strictly as Stage I, Stage II, Stage III, or Stage IV."),
    ("Grade", "Explicit mentions of the progression rate or risk factor for Periodontitis, denoted strictly as Grade A, Grade B, or Grade C."),
    ("Extent", "Explicit mentions of the spatial distribution or area affected by the condition (applicable to both Periodontitis and Gingivitis), such as Localized or Generalized."),
    ("Subtype", "Explicit mentions of the specific state of the periodontal tissues or historical context (applicable to Gingivitis or Gingival Health), such as Intact Periodontium, Reduced Periodontium, Stable Periodontitis, or Non-Periodontitis."),
    ("Social Factors", "Explicit references to health-impacting social behaviors, such as 'smoking,' 'drinking alcohol,' 'tobacco use,' or 'drug use'. Excludes negated statements (e.g., 'non-smoker,' 'denies drug use')."),
    ("HbA1c Levels", "Explicit numerical mentions of 'HbA1c test results', including units when provided (e.g., 'HbA1c 6.5%,' 'HbA1c level of 7.2%')."),
    ("Systemic Condition", "Explicit mentions of diagnosed medical conditions, systemic diseases, or disorders, whether currently active or historical (e.g., hypertension, Type 2 Diabetes, asthma, obesity, history of stroke)."),
    ("Family History Disease", "Explicit mentions of medical conditions in the patient's family members or inherited diseases (e.g., family history of heart disease, mother has diabetes)."),
    ("Previous Medical Procedure", "Explicit mentions of surgical interventions, therapeutic treatments, implants, or hospitalizations that occurred prior to the current visit (e.g., appendectomy, chemotherapy, previous C-section, stent placement, pacemaker)."),
    ("Medication Allergy", "Explicit mentions of allergic reactions to medications (e.g., penicillin allergy), excluding negated statements or indications of no allergy (e.g., no allergy to penicillin, denies medication allergies, NKDA - No Known Drug Allergies)."),
    ("Medication Taken", "Explicit mentions of medications or supplements currently taken, prescribed for home use, or previously used by the patient (e.g., taking metformin, Amoxicillin, vitamin B12). Excludes hypothetical suggestions or recommendations, dosage instructions, and medications administered acutely as part of the current procedure or visit."),
    ("Brushing frequency", "Mentions of the patient's toothbrushing frequency or habits (e.g., \"brushes twice a day\"). Exclude negated statements (e.g., \"does not brush\"), suggestions or instructions, and brushing done only during an in-office procedure."),
    ("Flossing", "Mentions of flossing frequency or habits, including proxy brush, interdental brush, or Waterpik use at home (e.g., \"flosses daily,\" \"uses Waterpik nightly\"). Exclude negated statements, suggestions or advice, and interdental cleaning done only during in-office procedures."),
    ("Other Home Care", "Mentions of at-home oral hygiene behaviors other than brushing and flossing (e.g., mouthwash, fluoride products, tongue cleaning). Exclude negated behaviors, suggestions or instructions, and products applied or used only as part of in-office treatment or procedures."),
];

/// Ordered set of entity types with unique names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntityRegistry {
    entities: Vec<EntityType>,
}

impl Default for EntityRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl EntityRegistry {
    /// The 19 dental entity types with their bundled descriptions.
    pub fn builtin() -> Self {
        Self {
            entities: BUILTIN_ENTITIES
                .iter()
                .map(|(name, description)| EntityType {
                    name: (*name).to_string(),
                    description: (*description).to_string(),
                })
                .collect(),
        }
    }

    pub fn empty() -> Self {
        Self { entities: Vec::new() }
    }

    pub fn register(&mut self, entity: EntityType) -> Result<(), CorpusError> {
        if self.get(&entity.name).is_some() {
            return Err(CorpusError::DuplicateEntity(entity.name));
        }
        self.entities.push(entity);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&EntityType> {
        self.entities.iter().find(|e| e.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &EntityType> {
        self.entities.iter()
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnnotation {
    pub note_id: String,
    #[serde(rename = "entity")]
    pub entity_type: String,
    pub text: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    pub notes: Vec<Note>,
    pub annotations: Vec<GoldAnnotation>,
}

impl Corpus {
    /// Gold texts of `entity` for `note_id`, in file order.
    pub fn golds_for<'a>(&'a self, note_id: &'a str, entity: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.annotations
            .iter()
            .filter(move |a| a.note_id == note_id && a.entity_type == entity)
            .map(|a| a.text.as_str())
    }

    /// Entity names that occur in the annotations, in registry order.
    pub fn annotated_entities(&self, registry: &EntityRegistry) -> Vec<String> {
        let present: BTreeSet<&str> = self.annotations.iter().map(|a| a.entity_type.as_str()).collect();
        registry.iter().filter(|e| present.contains(e.name.as_str())).map(|e| e.name.clone()).collect()
    }
}

pub fn load_corpus(
    notes_path: &Path,
    annotations_path: &Path,
    registry: &EntityRegistry,
) -> Result<Corpus, CorpusError> {
    let read = |p: &Path| fs::read_to_string(p).map_err(|source| CorpusError::Io { path: p.to_path_buf(), source });
    let notes = parse_notes(&read(notes_path)?, notes_path)?;
    let annotations = parse_annotations(&read(annotations_path)?, annotations_path, &notes, registry)?;
    Ok(Corpus { notes, annotations })
}

fn records<'a, T: serde::de::DeserializeOwned>(
    content: &'a str,
    path: &'a Path,
) -> impl Iterator<Item = Result<(usize, T), CorpusError>> + 'a {
    content.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).map(move |(i, l)| {
        serde_json::from_str::<T>(l).map(|r| (i + 1, r)).map_err(|e| CorpusError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })
    })
}

pub fn parse_notes(content: &str, path: &Path) -> Result<Vec<Note>, CorpusError> {
    let mut seen = HashSet::new();
    let mut notes = Vec::new();
    for rec in records::<Note>(content, path) {
        let (line, note) = rec?;
        if !seen.insert(note.note_id.clone()) {
            return Err(CorpusError::DuplicateNote { path: path.to_path_buf(), line, note_id: note.note_id });
        }
        notes.push(note);
    }
    Ok(notes)
}

pub fn parse_annotations(
    content: &str,
    path: &Path,
    notes: &[Note],
    registry: &EntityRegistry,
) -> Result<Vec<GoldAnnotation>, CorpusError> {
    let known: HashSet<&str> = notes.iter().map(|n| n.note_id.as_str()).collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in records::<GoldAnnotation>(content, path) {
        let (line, ann) = rec?;
        if fold(&ann.text).is_empty() {
            return Err(CorpusError::Malformed {
                path: path.to_path_buf(),
                line,
                message: "annotation text is empty".into(),
            });
        }
        if registry.get(&ann.entity_type).is_none() {
            return Err(CorpusError::UnknownEntity { path: path.to_path_buf(), line, entity: ann.entity_type });
        }
        if !known.contains(ann.note_id.as_str()) {
            return Err(CorpusError::UnknownNote { path: path.to_path_buf(), line, note_id: ann.note_id });
        }
        if seen.insert((ann.note_id.clone(), ann.entity_type.clone(), ann.text.clone())) {
            out.push(ann);
        }
    }
    Ok(out)
}

/// Splits a note into sentences.
pub trait Segmenter: Send + Sync {
    fn segment(&self, note: &Note) -> Vec<Sentence>;
}

/// Terminator/newline segmenter with an abbreviation allowlist.
///
/// A sentence ends at every newline, and after `.`, `!` or `?` (plus any
/// trailing terminators and closing quotes/brackets) when followed by
/// whitespace or end of text. A period closing a title such as `Dr.` never
/// ends a sentence; a period closing another listed abbreviation (`y/o.`,
/// `pt.`, `e.g.`) ends one only when the next word is capitalized.
#[derive(Clone, Debug)]
pub struct RuleSegmenter {
    titles: Vec<String>,
    abbreviations: Vec<String>,
}

const TITLES: &[&str] = &["dr.", "drs.", "mr.", "mrs.", "ms.", "prof.", "st."];
const ABBREVIATIONS: &[&str] = &[
    "y/o.", "yo.", "pt.", "pts.", "e.g.", "i.e.", "vs.", "approx.", "hx.", "dx.", "tx.", "rx.", "sx.", "etc.", "mg.",
    "no.", "wk.", "wks.", "mo.", "mos.", "yr.", "yrs.", "b.i.d.", "t.i.d.", "q.d.",
];

impl Default for RuleSegmenter {
    fn default() -> Self {
        Self {
            titles: TITLES.iter().map(|s| s.to_string()).collect(),
            abbreviations: ABBREVIATIONS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl RuleSegmenter {
    pub fn with_abbreviations<I: IntoIterator<Item = String>>(mut self, extra: I) -> Self {
        self.abbreviations.extend(extra.into_iter().map(|a| a.to_lowercase()));
        self
    }

    fn cuts(&self, text: &str) -> Vec<usize> {
        let mut cuts = BTreeSet::new();
        for (i, c) in text.char_indices() {
            if c == '\n' {
                cuts.insert(i);
                continue;
            }
            if !matches!(c, '.' | '!' | '?') {
                continue;
            }
            let mut end = i + c.len_utf8();
            let rest = &text[end..];
            for r in rest.chars() {
                if matches!(r, '.' | '!' | '?' | '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}') {
                    end += r.len_utf8();
                } else {
                    break;
                }
            }
            match text[end..].chars().next() {
                None => {}
                Some(n) if n.is_whitespace() => {}
                Some(_) => continue,
            }
            if c == '.' && !self.period_ends_sentence(text, i, end) {
                continue;
            }
            cuts.insert(end);
        }
        cuts.into_iter().collect()
    }

    fn period_ends_sentence(&self, text: &str, period: usize, end: usize) -> bool {
        let word_start = text[..period]
            .char_indices()
            .rev()
            .find(|(_, c)| c.is_whitespace())
            .map(|(i, c)| i + c.len_utf8())
            .unwrap_or(0);
        let word = text[word_start..=period].trim_start_matches(['(', '[', '"', '\'']).to_lowercase();
        if self.titles.contains(&word) {
            return false;
        }
        if self.abbreviations.contains(&word) {
            return text[end..]
                .chars()
                .find(|c| !c.is_whitespace() || *c == '\n')
                .is_none_or(|c| c == '\n' || c.is_uppercase());
        }
        true
    }
}

impl Segmenter for RuleSegmenter {
    fn segment(&self, note: &Note) -> Vec<Sentence> {
        let text = note.text.as_str();
        let mut out = Vec::new();
        let mut start = 0;
        let mut bounds = self.cuts(text);
        bounds.push(text.len());
        for cut in bounds {
            let piece = &text[start..cut];
            let lead = piece.len() - piece.trim_start().len();
            let trimmed = piece.trim();
            if !trimmed.is_empty() {
                let s = start + lead;
                out.push(Sentence {
                    note_id: note.note_id.clone(),
                    index: out.len(),
                    text: trimmed.to_string(),
                    char_range: (s, s + trimmed.len()),
                });
            }
            start = cut;
        }
        out
    }
}

/// Gold texts (deduplicated, annotation order) that the sentence contains.
///
/// Containment is a case-insensitive, whitespace-normalized substring test
/// with a partial-similarity fallback at `threshold`.
pub fn sentence_golds<'a, I>(sentence: &Sentence, golds: I, threshold: f64) -> Vec<String>
where
    I: IntoIterator<Item = &'a str>,
{
    let folded = fold(&sentence.text);
    let mut out: Vec<String> = Vec::new();
    for g in golds {
        let fg = fold(g);
        if fg.is_empty() {
            continue;
        }
        let hit = folded.contains(&fg) || partial_similarity(&fg, &folded).reaches(threshold);
        if hit && !out.iter().any(|o| o == g) {
            out.push(g.to_string());
        }
    }
    out
}

/// Sentences split into positives and negatives for one entity, with the gold
/// texts attached to every positive.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Labeled {
    pub positives: Vec<Sentence>,
    pub negatives: Vec<Sentence>,
    pub golds: BTreeMap<SentenceKey, Vec<String>>,
}

pub fn label_sentences(sentences: &[Sentence], corpus_golds: &[GoldAnnotation], entity: &str) -> Labeled {
    label_sentences_at(sentences, corpus_golds, entity, DEFAULT_MATCH_THRESHOLD)
}

pub fn label_sentences_at(
    sentences: &[Sentence],
    corpus_golds: &[GoldAnnotation],
    entity: &str,
    threshold: f64,
) -> Labeled {
    let mut by_note: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for g in corpus_golds.iter().filter(|g| g.entity_type == entity) {
        by_note.entry(g.note_id.as_str()).or_default().push(g.text.as_str());
    }
    let mut out = Labeled::default();
    for s in sentences {
        let golds = by_note
            .get(s.note_id.as_str())
            .map(|g| sentence_golds(s, g.iter().copied(), threshold))
            .unwrap_or_default();
        if golds.is_empty() {
            out.negatives.push(s.clone());
        } else {
            out.golds.insert(s.key(), golds);
            out.positives.push(s.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn note(text: &str) -> Note {
        Note { note_id: "n1".into(), text: text.into() }
    }

    fn texts(s: &[Sentence]) -> Vec<&str> {
        s.iter().map(|s| s.text.as_str()).collect()
    }

    #[test]
    fn builtin_registry() {
        let r = EntityRegistry::builtin();
        assert_eq!(r.len(), 19);
        assert!(r.iter().all(|e| !e.description.is_empty()));
        assert!(r
            .get("HbA1c Levels")
            .unwrap()
            .description
            .contains("Explicit numerical mentions of 'HbA1c test results'"));
        let mut r = r;
        let dup = EntityType { name: "Age".into(), description: "x".into() };
        assert!(matches!(r.register(dup), Err(CorpusError::DuplicateEntity(_))));
        r.register(EntityType { name: "Tooth Number".into(), description: "x".into() }).unwrap();
        assert_eq!(r.len(), 20);
    }

    #[test]
    fn segment_basic_cases() {
        let seg = RuleSegmenter::default();
        assert!(seg.segment(&note("")).is_empty());
        assert!(seg.segment(&note("  \n\t ")).is_empty());
        let one = seg.segment(&note("no terminator"));
        assert_eq!(texts(&one), ["no terminator"]);
        assert_eq!(one[0].char_range, (0, 13));
        let two = seg.segment(&note("Pt is 56 y/o. Brushes 2x daily."));
        assert_eq!(texts(&two), ["Pt is 56 y/o.", "Brushes 2x daily."]);
    }

    #[test]
    fn segment_abbreviations_and_numbers() {
        let seg = RuleSegmenter::default();
        let s = seg.segment(&note("Seen by Dr. Patel today. HbA1c 6.5% last month! pt. reports no pain"));
        assert_eq!(texts(&s), ["Seen by Dr. Patel today.", "HbA1c 6.5% last month!", "pt. reports no pain"]);
        let s = seg.segment(&note("Meds: metformin (500 mg.) daily.\nFlosses 3x/wk"));
        assert_eq!(texts(&s), ["Meds: metformin (500 mg.) daily.", "Flosses 3x/wk"]);
    }

    #[test]
    fn segment_ranges_reconstruct_text() {
        let n = note("  A. B?  \n\n C \"quoted.\" D ");
        let s = RuleSegmenter::default().segment(&n);
        for (i, sent) in s.iter().enumerate() {
            assert_eq!(sent.index, i);
            assert_eq!(&n.text[sent.char_range.0..sent.char_range.1], sent.text);
        }
        assert_eq!(texts(&s), ["A.", "B?", "C \"quoted.\"", "D"]);
    }

    #[test]
    fn load_rejects_unknown_note() {
        let notes = parse_notes("{\"note_id\":\"a\",\"text\":\"x\"}\n", Path::new("n.jsonl")).unwrap();
        let err = parse_annotations(
            "{\"note_id\":\"zz\",\"entity\":\"Age\",\"text\":\"56\"}\n",
            Path::new("a.jsonl"),
            &notes,
            &EntityRegistry::builtin(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("\"zz\""), "{err}");
    }

    #[test]
    fn load_reports_line_numbers_and_dedups() {
        let err = parse_notes("{\"note_id\":\"a\",\"text\":\"x\"}\nnot json\n", Path::new("n.jsonl")).unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 2, .. }));
        let notes = parse_notes("{\"note_id\":\"a\",\"text\":\"x\"}\n", Path::new("n.jsonl")).unwrap();
        let anns = parse_annotations(
            concat!(
                "{\"note_id\":\"a\",\"entity\":\"Age\",\"text\":\"56\"}\n",
                "{\"note_id\":\"a\",\"entity\":\"Age\",\"text\":\"56\"}\n",
                "{\"note_id\":\"a\",\"entity\":\"Sex\",\"text\":\"56\"}\n",
            ),
            Path::new("a.jsonl"),
            &notes,
            &EntityRegistry::builtin(),
        )
        .unwrap();
        assert_eq!(anns.len(), 2);
        let empty = parse_annotations("", Path::new("a.jsonl"), &notes, &EntityRegistry::builtin()).unwrap();
        assert!(empty.is_empty());
    }

    fn sent(text: &str, index: usize) -> Sentence {
        Sentence { note_id: "n1".into(), index, text: text.into(), char_range: (0, text.len()) }
    }

    fn gold(entity: &str, text: &str) -> GoldAnnotation {
        GoldAnnotation { note_id: "n1".into(), entity_type: entity.into(), text: text.into() }
    }

    #[test]
    fn labeling_partitions() {
        let sents = vec![sent("takes metformin daily", 0), sent("no pain", 1), sent("Stg III noted", 2)];
        let golds = vec![gold("Medication Taken", "Metformin"), gold("Stage", "Stage III")];
        let l = label_sentences(&sents, &golds, "Medication Taken");
        assert_eq!(texts(&l.positives), ["takes metformin daily"]);
        assert_eq!(l.negatives.len(), 2);
        assert_eq!(l.golds[&sents[0].key()], vec!["Metformin".to_string()]);

        // "stage iii" vs "stg iii noted": best window "stg iii" scores 87.5
        let l = label_sentences(&sents, &golds, "Stage");
        assert_eq!(texts(&l.positives), ["Stg III noted"]);

        let l = label_sentences(&sents, &golds, "Age");
        assert!(l.positives.is_empty());
        assert_eq!(l.negatives.len(), 3);
    }

    proptest::proptest! {
        #[test]
        fn segmentation_partitions_note(text in "[a-zA-Z0-9 .!?\n\"()/é]{0,120}") {
            let n = note(&text);
            let s = RuleSegmenter::default().segment(&n);
            let mut end = 0;
            let mut covered = vec![false; text.len()];
            for (i, sent) in s.iter().enumerate() {
                let (a, b) = sent.char_range;
                proptest::prop_assert_eq!(sent.index, i);
                proptest::prop_assert!(a >= end && a < b && b <= text.len());
                proptest::prop_assert_eq!(&text[a..b], sent.text.as_str());
                covered[a..b].iter_mut().for_each(|c| *c = true);
                end = b;
            }
            for (i, c) in text.char_indices() {
                proptest::prop_assert!(c.is_whitespace() || covered[i], "byte {} of {:?} not covered", i, text);
            }
            proptest::prop_assert_eq!(RuleSegmenter::default().segment(&n), s);
        }

        #[test]
        fn labeling_is_a_partition(
            words in proptest::collection::vec("[a-d]{1,6}( [a-d]{1,6}){0,4}", 0..12),
            golds in proptest::collection::vec("[a-d]{1,8}", 0..4),
        ) {
            let sents: Vec<Sentence> = words.iter().enumerate().map(|(i, w)| sent(w, i)).collect();
            let anns: Vec<GoldAnnotation> = golds.iter().map(|g| gold("Age", g)).collect();
            let l = label_sentences(&sents, &anns, "Age");
            proptest::prop_assert_eq!(l.positives.len() + l.negatives.len(), sents.len());
            let mut keys: Vec<SentenceKey> = l.positives.iter().chain(&l.negatives).map(|s| s.key()).collect();
            keys.sort();
            keys.dedup();
            proptest::prop_assert_eq!(keys.len(), sents.len());
            for p in &l.positives {
                proptest::prop_assert!(!l.golds[&p.key()].is_empty());
            }
            proptest::prop_assert_eq!(l.golds.len(), l.positives.len());
        }
    }
}
