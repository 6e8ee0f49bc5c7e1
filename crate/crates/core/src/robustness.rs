//! Artificially unnormalized text: systematic word edits and the
//! corruption sweep over operation and probability.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CorpusError, Sentence, Task};
use crate::nn::rng::{derive_seed, Stream};
use crate::train::{evaluate, SavedModel};

/// The three edit operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptOp {
    Insert,
    Delete,
    Substitute,
}

impl CorruptOp {
    pub const ALL: [CorruptOp; 3] = [CorruptOp::Insert, CorruptOp::Delete, CorruptOp::Substitute];

    pub fn name(self) -> &'static str {
        match self {
            CorruptOp::Insert => "insert",
            CorruptOp::Delete => "delete",
            CorruptOp::Substitute => "substitute",
        }
    }
}

/// One corruption configuration.
#[derive(Debug, Clone)]
pub struct CorruptionSpec {
    pub op: CorruptOp,
    /// Probability that an eligible word (length > 2) is edited.
    pub prob: f64,
    pub seed: u64,
    pub alphabet: Vec<char>,
}

/// Applies one edit to a word at a 0-based position.
///
/// INSERT puts `rand_char` before `position`, DELETE removes the character
/// there, SUBSTITUTE replaces it. For the word `abcdef` at position 2 the
/// results are `abxcdef`, `abdef` and `abxdef`.
pub fn corrupt_word(word: &str, op: CorruptOp, position: usize, rand_char: Option<char>) -> String {
    let mut chars: Vec<char> = word.chars().collect();
    assert!(
        chars.len() > 2,
        "only words longer than two characters are edited"
    );
    assert!(position < chars.len(), "position {} out of range", position);
    match op {
        CorruptOp::Insert => {
            chars.insert(position, rand_char.expect("insert needs a character"));
        }
        CorruptOp::Delete => {
            chars.remove(position);
        }
        CorruptOp::Substitute => {
            chars[position] = rand_char.expect("substitute needs a character");
        }
    }
    chars.into_iter().collect()
}

/// Decides the replacement form for one token, if any. Words of length
/// <= 2 are never touched. Substitution samples from the alphabet minus
/// the original character so an applied edit is always visible.
fn edit_token<R: Rng>(form: &str, spec: &CorruptionSpec, rng: &mut R) -> Option<String> {
    let len = form.chars().count();
    if len <= 2 {
        return None;
    }
    if rng.random::<f64>() >= spec.prob {
        return None;
    }
    let position = rng.random_range(0..len);
    let rand_char = match spec.op {
        CorruptOp::Delete => None,
        CorruptOp::Insert => Some(spec.alphabet[rng.random_range(0..spec.alphabet.len())]),
        CorruptOp::Substitute => {
            let original = form.chars().nth(position).unwrap();
            let pool: Vec<char> = spec
                .alphabet
                .iter()
                .copied()
                .filter(|&c| c != original)
                .collect();
            if pool.is_empty() {
                // Degenerate single-character alphabet: nothing to change.
                return None;
            }
            Some(pool[rng.random_range(0..pool.len())])
        }
    };
    Some(corrupt_word(form, spec.op, position, rand_char))
}

/// Per-token replacement forms for every sentence, `None` where a token is
/// left alone. Deterministic for a fixed spec and input: each sentence
/// draws from its own derived seed.
pub fn corruption_plan(sentences: &[Sentence], spec: &CorruptionSpec) -> Vec<Vec<Option<String>>> {
    assert!(!spec.alphabet.is_empty(), "alphabet must be non-empty");
    assert!((0.0..=1.0).contains(&spec.prob));
    sentences
        .iter()
        .enumerate()
        .map(|(idx, sentence)| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, Stream::Sentence, idx as u64, 0));
            sentence
                .tokens
                .iter()
                .map(|t| edit_token(&t.form, spec, &mut rng))
                .collect()
        })
        .collect()
}

/// Copies the corpus with corrupted word forms; gold annotations are
/// untouched.
pub fn corrupt_corpus(sentences: &[Sentence], spec: &CorruptionSpec) -> Vec<Sentence> {
    let plan = corruption_plan(sentences, spec);
    sentences
        .iter()
        .zip(plan)
        .map(|(sentence, forms)| {
            let mut out = sentence.clone();
            for (token, replacement) in out.tokens.iter_mut().zip(forms) {
                if let Some(form) = replacement {
                    token.form = form;
                }
            }
            out
        })
        .collect()
}

/// Distinct characters of all word forms in first-occurrence order,
/// excluding whitespace.
pub fn default_alphabet(sentences: &[Sentence]) -> Vec<char> {
    let mut seen = std::collections::HashSet::new();
    let mut alphabet = Vec::new();
    for sentence in sentences {
        for token in &sentence.tokens {
            for c in token.form.chars() {
                if !c.is_whitespace() && seen.insert(c) {
                    alphabet.push(c);
                }
            }
        }
    }
    alphabet
}

pub const SWEEP_PROBS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

/// Accuracies of a POS model on the dev set under every operation and
/// probability, plus the uncorrupted baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessTable {
    pub baseline: f64,
    /// Rows in [`CorruptOp::ALL`] order, columns in [`SWEEP_PROBS`] order.
    pub rows: [[f64; 4]; 3],
}

impl RobustnessTable {
    /// TSV rendering: the baseline, a header of probabilities, one row per
    /// operation, accuracies with 4 decimals.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("baseline\t{:.4}\n", self.baseline);
        out.push_str("op");
        for p in SWEEP_PROBS {
            out.push_str(&format!("\t{:.2}", p));
        }
        out.push('\n');
        for (op, row) in CorruptOp::ALL.iter().zip(self.rows.iter()) {
            out.push_str(op.name());
            for acc in row {
                out.push_str(&format!("\t{:.4}", acc));
            }
            out.push('\n');
        }
        out
    }

    /// Mean accuracy over the three operations per probability column.
    pub fn mean_per_prob(&self) -> [f64; 4] {
        let mut means = [0.0f64; 4];
        for (col, mean) in means.iter_mut().enumerate() {
            *mean = self.rows.iter().map(|r| r[col]).sum::<f64>() / 3.0;
        }
        means
    }
}

/// Runs the corruption sweep: 3 operations x 4 probabilities, each with a
/// seed derived from the operation and probability indices.
pub fn robustness_experiment(
    model: &SavedModel,
    dev: &[Sentence],
    alphabet: &[char],
    seed: u64,
) -> Result<RobustnessTable, CorpusError> {
    assert_eq!(model.task, Task::Pos, "the corruption sweep predicts POS");
    let baseline = evaluate(&model.params, &model.config, &model.vocab, dev, model.task)?;
    let mut rows = [[0.0f64; 4]; 3];
    for (oi, op) in CorruptOp::ALL.iter().enumerate() {
        for (pi, prob) in SWEEP_PROBS.iter().enumerate() {
            let spec = CorruptionSpec {
                op: *op,
                prob: *prob,
                seed: derive_seed(seed, Stream::Corruption, oi as u64, pi as u64),
                alphabet: alphabet.to_vec(),
            };
            let corrupted = corrupt_corpus(dev, &spec);
            let result = evaluate(
                &model.params,
                &model.config,
                &model.vocab,
                &corrupted,
                model.task,
            )?;
            rows[oi][pi] = result.accuracy;
        }
    }
    Ok(RobustnessTable {
        baseline: baseline.accuracy,
        rows,
    })
}
