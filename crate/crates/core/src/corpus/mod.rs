//! CoNLL-U ingestion, per-task gold tags and vocabularies.

pub mod conllu;
pub mod supertag;
pub mod vocab;

use thiserror::Error;

pub use conllu::{parse_conllu, parse_conllu_with_lines, write_conllu};
pub use vocab::{build_vocab, Vocabulary, PAD_ID, UNK_ID};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("sentence \"{snippet}\": {reason}")]
    NotATree { snippet: String, reason: String },
}

/// One syntactic word of a sentence. Multiword-token ranges and empty nodes
/// never become tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub form: String,
    pub upos: String,
    /// Raw FEATS column, `_` if empty. Treated as one atomic tag.
    pub feats: String,
    /// 0 for the root, otherwise the 1-based index of the head token.
    pub head: usize,
    pub deprel: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Short form-based identifier for error messages.
    pub fn snippet(&self) -> String {
        let mut s = self
            .tokens
            .iter()
            .take(5)
            .map(|t| t.form.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        if self.tokens.len() > 5 {
            s.push_str(" ...");
        }
        s
    }
}

/// The three tagging tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Pos,
    Morph,
    Stag,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Pos => "pos",
            Task::Morph => "morph",
            Task::Stag => "stag",
        }
    }
}

/// Gold tag sequence of a sentence for a task.
///
/// POS and MORPH are column projections; STAG extracts dependency-based
/// supertags and requires a single-rooted, acyclic tree.
pub fn gold_tags(sentence: &Sentence, task: Task) -> Result<Vec<String>, CorpusError> {
    match task {
        Task::Pos => Ok(sentence.tokens.iter().map(|t| t.upos.clone()).collect()),
        Task::Morph => Ok(sentence.tokens.iter().map(|t| t.feats.clone()).collect()),
        Task::Stag => supertag::extract(sentence),
    }
}

/// Distinct-tag count and per-tag frequencies in first-occurrence order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagsetStats {
    pub distinct: usize,
    pub histogram: Vec<(String, u64)>,
}

pub fn tagset_stats(sentences: &[Sentence], task: Task) -> Result<TagsetStats, CorpusError> {
    let mut order: Vec<String> = Vec::new();
    let mut counts: std::collections::HashMap<String, u64> = std::collections::HashMap::new();
    for sentence in sentences {
        for tag in gold_tags(sentence, task)? {
            if !counts.contains_key(&tag) {
                order.push(tag.clone());
            }
            *counts.entry(tag).or_insert(0) += 1;
        }
    }
    let histogram: Vec<(String, u64)> = order
        .into_iter()
        .map(|tag| {
            let c = counts[&tag];
            (tag, c)
        })
        .collect();
    Ok(TagsetStats {
        distinct: histogram.len(),
        histogram,
    })
}
