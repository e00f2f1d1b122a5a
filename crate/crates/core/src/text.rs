//! Tokenization, seeded phrase detection and vocabularies.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::corpus::DocumentRecord;
use crate::error::{Error, Result};

/// Normalized tokens of one document.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenStream(Vec<String>);

impl TokenStream {
    pub fn new(tokens: Vec<String>) -> Self {
        Self(tokens)
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }
}

impl From<Vec<String>> for TokenStream {
    fn from(v: Vec<String>) -> Self {
        Self(v)
    }
}

impl<'a> FromIterator<&'a str> for TokenStream {
    fn from_iter<I: IntoIterator<Item = &'a str>>(iter: I) -> Self {
        Self(iter.into_iter().map(str::to_owned).collect())
    }
}

fn is_token_char(c: char) -> bool {
    c.is_alphanumeric() || c == '-'
}

/// Lowercased maximal runs of letters, digits and hyphens.
/// Hyphens at the edges of a run are trimmed; runs of only hyphens vanish.
pub fn tokenize_text(text: &str) -> Vec<String> {
    text.split(|c: char| !is_token_char(c))
        .map(|run| run.trim_matches('-'))
        .filter(|run| !run.is_empty())
        .map(|run| run.to_lowercase())
        .collect()
}

/// Tokenizes title followed by body.
pub fn tokenize(document: &DocumentRecord) -> TokenStream {
    let mut tokens = tokenize_text(&document.title);
    tokens.extend(tokenize_text(&document.body));
    TokenStream(tokens)
}

/// Normal form of a multiword name: tokens joined with underscores.
pub fn normalize_phrase(raw: &str) -> String {
    tokenize_text(raw).join("_")
}

/// Reads a seed or candidate list: one phrase per line, normalized on load.
pub fn load_phrase_list(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut seen = HashSet::new();
    Ok(text
        .lines()
        .map(normalize_phrase)
        .filter(|p| !p.is_empty())
        .filter(|p| seen.insert(p.clone()))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhraseParams {
    /// Discount subtracted from the bigram count.
    pub delta: f64,
    /// Minimum score for a learned phrase.
    pub threshold: f64,
    /// Number of detection passes; pass `n` can produce phrases of up to `n + 1` words.
    pub passes: usize,
}

impl Default for PhraseParams {
    fn default() -> Self {
        Self {
            delta: 5.0,
            threshold: 10.0,
            passes: 1,
        }
    }
}

/// Count-based collocation score, scaled by the total token count:
/// `(count(ab) - delta) / (count(a) * count(b)) * total`.
pub fn phrase_score(count_ab: u64, count_a: u64, count_b: u64, total: u64, delta: f64) -> f64 {
    (count_ab as f64 - delta) / (count_a as f64 * count_b as f64) * total as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhraseOrigin {
    Seed,
    Learned,
}

impl PhraseOrigin {
    pub fn as_str(self) -> &'static str {
        match self {
            PhraseOrigin::Seed => "seed",
            PhraseOrigin::Learned => "learned",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhraseDictionary {
    seeded: BTreeSet<String>,
    learned: BTreeMap<String, f64>,
    pub delta: f64,
    pub threshold: f64,
}

impl Default for PhraseDictionary {
    fn default() -> Self {
        let p = PhraseParams::default();
        Self::new(BTreeSet::new(), p.delta, p.threshold)
    }
}

impl PhraseDictionary {
    pub fn new(seeded: BTreeSet<String>, delta: f64, threshold: f64) -> Self {
        Self {
            seeded,
            learned: BTreeMap::new(),
            delta,
            threshold,
        }
    }

    pub fn seeded(&self) -> &BTreeSet<String> {
        &self.seeded
    }

    pub fn learned(&self) -> &BTreeMap<String, f64> {
        &self.learned
    }

    pub fn contains(&self, phrase: &str) -> bool {
        self.seeded.contains(phrase) || self.learned.contains_key(phrase)
    }

    pub fn score(&self, phrase: &str) -> Option<f64> {
        self.learned.get(phrase).copied()
    }

    pub fn len(&self) -> usize {
        self.seeded.len() + self.learned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Iterates `(phrase, score, origin)` in phrase order; seeds carry no score.
    pub fn entries(&self) -> impl Iterator<Item = (&str, Option<f64>, PhraseOrigin)> {
        let mut all: Vec<_> = self
            .seeded
            .iter()
            .map(|p| (p.as_str(), None, PhraseOrigin::Seed))
            .chain(
                self.learned
                    .iter()
                    .map(|(p, &s)| (p.as_str(), Some(s), PhraseOrigin::Learned)),
            )
            .collect();
        all.sort_by(|a, b| a.0.cmp(b.0));
        all.into_iter()
    }

    pub fn matcher(&self) -> PhraseMatcher {
        PhraseMatcher::new(self.seeded.iter().chain(self.learned.keys()))
    }

    /// CSV `phrase,score,origin`.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["phrase", "score", "origin"])
            .expect("in-memory write");
        for (phrase, score, origin) in self.entries() {
            let score = score.map(|s| s.to_string()).unwrap_or_default();
            w.write_record([phrase, score.as_str(), origin.as_str()])
                .expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn from_csv(path: &Path, delta: f64, threshold: f64) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut dict = Self::new(BTreeSet::new(), delta, threshold);
        for row in reader.records() {
            let row = row.map_err(|e| Error::csv(path, e))?;
            let (Some(phrase), Some(score), Some(origin)) = (row.get(0), row.get(1), row.get(2))
            else {
                return Err(Error::Format(format!("short row in {}", path.display())));
            };
            match origin {
                "seed" => {
                    dict.seeded.insert(phrase.to_string());
                }
                "learned" => {
                    let s: f64 = score.parse().map_err(|_| {
                        Error::Format(format!("bad score {score:?} in {}", path.display()))
                    })?;
                    dict.learned.insert(phrase.to_string(), s);
                }
                other => {
                    return Err(Error::Format(format!("unknown phrase origin {other:?}")));
                }
            }
        }
        Ok(dict)
    }
}

/// Longest-match, left-to-right phrase merger.
#[derive(Debug, Clone, Default)]
pub struct PhraseMatcher {
    phrases: HashSet<String>,
    max_parts: usize,
}

impl PhraseMatcher {
    pub fn new<'a>(phrases: impl IntoIterator<Item = &'a String>) -> Self {
        let mut set = HashSet::new();
        let mut max_parts = 0;
        for p in phrases {
            let parts = p.split('_').count();
            if parts >= 2 {
                max_parts = max_parts.max(parts);
                set.insert(p.clone());
            }
        }
        Self {
            phrases: set,
            max_parts,
        }
    }

    pub fn apply(&self, stream: &TokenStream) -> TokenStream {
        if self.phrases.is_empty() {
            return stream.clone();
        }
        let tokens = stream.tokens();
        let mut out = Vec::with_capacity(tokens.len());
        let mut buf = String::new();
        let mut i = 0;
        while i < tokens.len() {
            let longest = self.max_parts.min(tokens.len() - i);
            let mut matched = 1;
            for len in (2..=longest).rev() {
                buf.clear();
                for (j, t) in tokens[i..i + len].iter().enumerate() {
                    if j > 0 {
                        buf.push('_');
                    }
                    buf.push_str(t);
                }
                if self.phrases.contains(buf.as_str()) {
                    matched = len;
                    break;
                }
            }
            if matched == 1 {
                out.push(tokens[i].clone());
            } else {
                out.push(tokens[i..i + matched].join("_"));
            }
            i += matched;
        }
        TokenStream(out)
    }
}

pub fn apply_phrases(stream: &TokenStream, dict: &PhraseDictionary) -> TokenStream {
    dict.matcher().apply(stream)
}

/// Seeds always enter the dictionary. Each pass merges known phrases, then
/// learns every adjacent pair whose score reaches the threshold.
pub fn detect_phrases(
    corpus: &[TokenStream],
    seeds: &BTreeSet<String>,
    params: PhraseParams,
) -> PhraseDictionary {
    let mut dict = PhraseDictionary::new(seeds.clone(), params.delta, params.threshold);
    for _ in 0..params.passes.max(1) {
        let matcher = dict.matcher();
        let merged: Vec<TokenStream> = corpus.iter().map(|s| matcher.apply(s)).collect();

        let mut ids: HashMap<&str, u32> = HashMap::new();
        let mut names: Vec<&str> = Vec::new();
        let mut unigram: Vec<u64> = Vec::new();
        let mut bigram: HashMap<(u32, u32), u64> = HashMap::new();
        let mut total = 0u64;
        for stream in &merged {
            let mut prev: Option<u32> = None;
            for tok in stream.iter() {
                let id = *ids.entry(tok.as_str()).or_insert_with(|| {
                    names.push(tok.as_str());
                    unigram.push(0);
                    (names.len() - 1) as u32
                });
                unigram[id as usize] += 1;
                total += 1;
                if let Some(p) = prev {
                    *bigram.entry((p, id)).or_insert(0) += 1;
                }
                prev = Some(id);
            }
        }

        let mut found = Vec::new();
        for (&(a, b), &count) in &bigram {
            let score = phrase_score(
                count,
                unigram[a as usize],
                unigram[b as usize],
                total,
                params.delta,
            );
            if score >= params.threshold {
                let phrase = format!("{}_{}", names[a as usize], names[b as usize]);
                if !dict.contains(&phrase) {
                    found.push((phrase, score));
                }
            }
        }
        if found.is_empty() {
            break;
        }
        dict.learned.extend(found);
    }
    dict
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub term: String,
    pub count: u64,
    pub doc_freq: u64,
}

/// Terms with dense ids, ordered by descending count then term.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<VocabEntry>,
    index: HashMap<String, usize>,
    min_count: u64,
}

impl Vocabulary {
    pub fn from_entries(entries: Vec<VocabEntry>, min_count: u64) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if index.insert(e.term.clone(), i).is_some() {
                return Err(Error::Format(format!(
                    "duplicate vocabulary term {:?}",
                    e.term
                )));
            }
        }
        Ok(Self {
            entries,
            index,
            min_count,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn id(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn get(&self, term: &str) -> Option<&VocabEntry> {
        self.id(term).map(|i| &self.entries[i])
    }

    pub fn term(&self, id: usize) -> &str {
        &self.entries[id].term
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn counts(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|e| e.count)
    }

    pub fn total_count(&self) -> u64 {
        self.counts().sum()
    }

    /// Maps tokens to ids, dropping out-of-vocabulary tokens.
    pub fn encode(&self, stream: &TokenStream) -> Vec<u32> {
        stream
            .iter()
            .filter_map(|t| self.id(t).map(|i| i as u32))
            .collect()
    }
}

pub fn term_counts<'a>(
    corpus: impl IntoIterator<Item = &'a TokenStream>,
) -> HashMap<String, (u64, u64)> {
    let mut counts: HashMap<String, (u64, u64)> = HashMap::new();
    let mut seen: HashSet<&str> = HashSet::new();
    for stream in corpus {
        seen.clear();
        for tok in stream.iter() {
            let e = counts.entry(tok.clone()).or_insert((0, 0));
            e.0 += 1;
            if seen.insert(tok.as_str()) {
                e.1 += 1;
            }
        }
    }
    counts
}

pub fn build_vocabulary<'a>(
    corpus: impl IntoIterator<Item = &'a TokenStream>,
    min_count: u64,
) -> Result<Vocabulary> {
    let mut entries: Vec<VocabEntry> = term_counts(corpus)
        .into_iter()
        .filter(|(_, (count, _))| *count >= min_count)
        .map(|(term, (count, doc_freq))| VocabEntry {
            term,
            count,
            doc_freq,
        })
        .collect();
    if entries.is_empty() {
        return Err(Error::EmptyVocabulary(min_count));
    }
    entries.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.term.cmp(&b.term)));
    Vocabulary::from_entries(entries, min_count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts(words: &[&str]) -> TokenStream {
        words.iter().copied().collect()
    }

    fn seeds(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize_text("Folic Acid, 5mg."), ["folic", "acid", "5mg"]);
        assert_eq!(tokenize_text("SARS-CoV-2"), ["sars-cov-2"]);
        assert_eq!(tokenize_text("-- (N=12) ---"), ["n", "12"]);
        assert_eq!(tokenize_text("ÉTUDE Ärzte"), ["étude", "ärzte"]);
        assert!(tokenize_text("...!?").is_empty());
        assert_eq!(tokenize_text("snake_case"), ["snake", "case"]);
    }

    #[test]
    fn seed_survives_absence() {
        let corpus = vec![ts(&["nothing", "relevant", "here"])];
        let dict = detect_phrases(&corpus, &seeds(&["folic_acid"]), PhraseParams::default());
        assert!(dict.contains("folic_acid"));
    }

    #[test]
    fn single_occurrence_bigram_has_negative_score() {
        assert!(phrase_score(1, 1, 1, 100, 5.0) < 0.0);
        let corpus = vec![ts(&["rare", "pair", "x", "y"])];
        let dict = detect_phrases(&corpus, &BTreeSet::new(), PhraseParams::default());
        assert!(!dict.contains("rare_pair"));
    }

    #[test]
    fn planted_bigram_matches_hand_count() {
        // 50 x "spike protein", 5 extra "spike", 10 extra "protein", filler to 1000 tokens.
        let mut tokens: Vec<String> = Vec::new();
        for _ in 0..50 {
            tokens.extend(["spike".into(), "protein".into(), "f0".into()]);
        }
        for _ in 0..5 {
            tokens.extend(["spike".into(), "f1".into()]);
        }
        for _ in 0..10 {
            tokens.extend(["protein".into(), "f2".into()]);
        }
        let mut i = 0;
        while tokens.len() < 1000 {
            tokens.push(format!("w{}", i % 200));
            i += 1;
        }
        let corpus = vec![TokenStream::new(tokens)];
        let dict = detect_phrases(&corpus, &BTreeSet::new(), PhraseParams::default());
        // (50 - 5) / (55 * 60) * 1000
        let expected = 45.0 / 3300.0 * 1000.0;
        let got = dict.score("spike_protein").expect("learned");
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn apply_seeded_phrase() {
        let dict = PhraseDictionary::new(seeds(&["fluticasone_propionate"]), 5.0, 10.0);
        let out = apply_phrases(&ts(&["fluticasone", "propionate"]), &dict);
        assert_eq!(out, ts(&["fluticasone_propionate"]));
    }

    #[test]
    fn apply_empty_dictionary_is_identity() {
        let s = ts(&["a", "b", "c"]);
        assert_eq!(apply_phrases(&s, &PhraseDictionary::default()), s);
    }

    #[test]
    fn apply_left_to_right_priority() {
        let dict = PhraseDictionary::new(seeds(&["a_b", "b_c"]), 5.0, 10.0);
        assert_eq!(
            apply_phrases(&ts(&["a", "b", "c"]), &dict),
            ts(&["a_b", "c"])
        );
    }

    #[test]
    fn apply_prefers_longest() {
        let dict = PhraseDictionary::new(seeds(&["a_b", "a_b_c"]), 5.0, 10.0);
        assert_eq!(
            apply_phrases(&ts(&["x", "a", "b", "c", "a", "b"]), &dict),
            ts(&["x", "a_b_c", "a_b"])
        );
    }

    #[test]
    fn second_pass_finds_trigram() {
        let mut corpus = Vec::new();
        for i in 0..40 {
            let mut doc: Vec<String> = vec!["new".into(), "york".into(), "city".into()];
            doc.extend((0..20).map(|j| format!("f{i}x{j}")));
            corpus.push(TokenStream::new(doc));
        }
        let params = PhraseParams {
            passes: 2,
            ..Default::default()
        };
        let dict = detect_phrases(&corpus, &BTreeSet::new(), params);
        assert!(dict.contains("new_york") || dict.contains("york_city"));
        assert!(dict.contains("new_york_city"));
    }

    #[test]
    fn csv_round_trip() {
        let corpus: Vec<_> = (0..30).map(|_| ts(&["spike", "protein", "x"])).collect();
        let dict = detect_phrases(&corpus, &seeds(&["folic_acid"]), PhraseParams::default());
        let tmp = tempfile::NamedTempFile::new().unwrap();
        fs::write(tmp.path(), dict.to_csv()).unwrap();
        let back = PhraseDictionary::from_csv(tmp.path(), dict.delta, dict.threshold).unwrap();
        assert_eq!(back, dict);
    }

    #[test]
    fn vocabulary_min_count() {
        let corpus = vec![ts(&["a", "a", "b"]), ts(&["a", "b", "c"])];
        let v = build_vocabulary(&corpus, 3).unwrap();
        assert_eq!(v.len(), 1);
        assert!(v.get("b").is_none());
        assert_eq!(v.get("a").unwrap().doc_freq, 2);
        let all = build_vocabulary(&corpus, 1).unwrap();
        assert_eq!(all.len(), 3);
        assert!(matches!(
            build_vocabulary(&corpus, 10),
            Err(Error::EmptyVocabulary(10))
        ));
    }

    #[test]
    fn vocabulary_counts_match_tally() {
        let docs: Vec<TokenStream> = (0..10)
            .map(|d| {
                (0..(d + 3))
                    .map(|i| format!("t{}", (i * (d + 1)) % 7))
                    .collect::<Vec<_>>()
                    .into()
            })
            .collect();
        let v = build_vocabulary(&docs, 1).unwrap();
        for e in v.entries() {
            let count: u64 = docs
                .iter()
                .map(|d| d.iter().filter(|t| **t == e.term).count() as u64)
                .sum();
            let df = docs
                .iter()
                .filter(|d| d.iter().any(|t| *t == e.term))
                .count() as u64;
            assert_eq!((e.count, e.doc_freq), (count, df), "{}", e.term);
        }
    }

    fn word() -> impl Strategy<Value = String> {
        prop::sample::select(vec!["a", "b", "c", "d", "e"]).prop_map(str::to_owned)
    }

    proptest! {
        #[test]
        fn apply_preserves_word_multiset(
            words in prop::collection::vec(word(), 0..40),
            phrases in prop::collection::btree_set(
                prop::collection::vec(word(), 2..4).prop_map(|w| w.join("_")), 0..6),
        ) {
            let dict = PhraseDictionary::new(phrases, 5.0, 10.0);
            let stream = TokenStream::new(words.clone());
            let out = apply_phrases(&stream, &dict);
            prop_assert!(out.len() <= stream.len());
            let rejoined: Vec<String> = out.iter()
                .flat_map(|t| t.split('_').map(str::to_owned).collect::<Vec<_>>())
                .collect();
            prop_assert_eq!(rejoined, words);
        }

        #[test]
        fn seeds_survive_any_threshold(threshold in -1e6f64..1e6, delta in 0.0f64..20.0) {
            let corpus = vec![ts(&["a", "b", "a", "b", "c"])];
            let s = seeds(&["x_y", "a_c"]);
            let dict = detect_phrases(&corpus, &s, PhraseParams { delta, threshold, passes: 2 });
            for seed in &s {
                prop_assert!(dict.contains(seed));
            }
            for &score in dict.learned().values() {
                prop_assert!(score >= threshold);
            }
        }

        #[test]
        fn vocabulary_ids_are_bijective(words in prop::collection::vec(word(), 1..50)) {
            let corpus = vec![TokenStream::new(words)];
            let v = build_vocabulary(&corpus, 1).unwrap();
            for (i, e) in v.entries().iter().enumerate() {
                prop_assert_eq!(v.id(&e.term), Some(i));
            }
        }
    }
}
