//! Bidirectional word / character / tag index maps.
//!
//! Words and characters reserve PAD=0 and UNK=1. Tags form a closed set
//! with no UNK: a dev/test tag outside the training set is a legal input to
//! evaluation and is simply never predicted.

use std::collections::HashMap;

use super::{gold_tags, CorpusError, Sentence, Task};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// The number of reserved word/char ids before observed items.
pub const RESERVED: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    word_ids: HashMap<String, usize>,
    chars: Vec<char>,
    char_ids: HashMap<char, usize>,
    tags: Vec<String>,
    tag_ids: HashMap<String, usize>,
    word_freq: HashMap<String, u64>,
}

impl Vocabulary {
    /// Builds the vocabulary from sentences and their precomputed gold tag
    /// sequences. Ids follow first-occurrence order.
    pub fn from_tagged(sentences: &[Sentence], tags_per_sentence: &[Vec<String>]) -> Self {
        assert_eq!(sentences.len(), tags_per_sentence.len());
        let mut vocab = Vocabulary {
            words: Vec::new(),
            word_ids: HashMap::new(),
            chars: Vec::new(),
            char_ids: HashMap::new(),
            tags: Vec::new(),
            tag_ids: HashMap::new(),
            word_freq: HashMap::new(),
        };
        for (sentence, tags) in sentences.iter().zip(tags_per_sentence.iter()) {
            for token in &sentence.tokens {
                vocab.observe_word(&token.form);
            }
            for tag in tags {
                vocab.observe_tag(tag);
            }
        }
        vocab
    }

    /// Reconstructs a vocabulary from serialized parts.
    pub fn from_parts(
        words: Vec<String>,
        freqs: Vec<u64>,
        chars: Vec<char>,
        tags: Vec<String>,
    ) -> Self {
        assert_eq!(words.len(), freqs.len());
        let word_ids = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i + RESERVED))
            .collect();
        let char_ids = chars
            .iter()
            .enumerate()
            .map(|(i, c)| (*c, i + RESERVED))
            .collect();
        let tag_ids = tags
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let word_freq = words.iter().cloned().zip(freqs.iter().copied()).collect();
        Vocabulary {
            words,
            word_ids,
            chars,
            char_ids,
            tags,
            tag_ids,
            word_freq,
        }
    }

    fn observe_word(&mut self, form: &str) {
        if !self.word_ids.contains_key(form) {
            self.word_ids
                .insert(form.to_string(), self.words.len() + RESERVED);
            self.words.push(form.to_string());
        }
        *self.word_freq.entry(form.to_string()).or_insert(0) += 1;
        for c in form.chars() {
            if !self.char_ids.contains_key(&c) {
                self.char_ids.insert(c, self.chars.len() + RESERVED);
                self.chars.push(c);
            }
        }
    }

    fn observe_tag(&mut self, tag: &str) {
        if !self.tag_ids.contains_key(tag) {
            self.tag_ids.insert(tag.to_string(), self.tags.len());
            self.tags.push(tag.to_string());
        }
    }

    /// Id of a word form, UNK for unseen forms.
    pub fn word_id(&self, form: &str) -> usize {
        self.word_ids.get(form).copied().unwrap_or(UNK_ID)
    }

    /// Id of a character, UNK for unseen characters.
    pub fn char_id(&self, c: char) -> usize {
        self.char_ids.get(&c).copied().unwrap_or(UNK_ID)
    }

    pub fn tag_id(&self, tag: &str) -> Option<usize> {
        self.tag_ids.get(tag).copied()
    }

    pub fn tag_str(&self, id: usize) -> &str {
        &self.tags[id]
    }

    pub fn word_str(&self, id: usize) -> Option<&str> {
        if id < RESERVED {
            None
        } else {
            self.words.get(id - RESERVED).map(|s| s.as_str())
        }
    }

    /// Total word-id space including PAD and UNK.
    pub fn word_count(&self) -> usize {
        self.words.len() + RESERVED
    }

    pub fn char_count(&self) -> usize {
        self.chars.len() + RESERVED
    }

    pub fn tag_count(&self) -> usize {
        self.tags.len()
    }

    pub fn word_freq(&self, form: &str) -> u64 {
        self.word_freq.get(form).copied().unwrap_or(0)
    }

    pub fn observed_words(&self) -> &[String] {
        &self.words
    }

    pub fn observed_chars(&self) -> &[char] {
        &self.chars
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }
}

/// Builds the vocabulary for a task directly from sentences.
///
/// For STAG this derives the gold tags first, so a malformed tree surfaces
/// here as an error.
pub fn build_vocab(sentences: &[Sentence], task: Task) -> Result<Vocabulary, CorpusError> {
    let tags: Vec<Vec<String>> = sentences
        .iter()
        .map(|s| gold_tags(s, task))
        .collect::<Result<_, _>>()?;
    Ok(Vocabulary::from_tagged(sentences, &tags))
}
