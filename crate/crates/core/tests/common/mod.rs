//! Shared fixtures for integration tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cnntag::corpus::{Sentence, Token};

/// Tag groups by final character; four roughly balanced classes keep the
/// majority baseline near 25%.
const FINAL_GROUPS: [(&[char], &str); 4] = [
    (&['a', 'e'], "T-AE"),
    (&['i', 'o'], "T-IO"),
    (&['u', 'y'], "T-UY"),
    (&['s', 't'], "T-ST"),
];

const CONSONANTS: [char; 10] = ['b', 'c', 'd', 'f', 'g', 'h', 'k', 'l', 'm', 'n'];

pub fn toy_tag_for(form: &str) -> &'static str {
    let last = form.chars().last().unwrap();
    for (chars, tag) in FINAL_GROUPS {
        if chars.contains(&last) {
            return tag;
        }
    }
    unreachable!("toy words always end in a group character")
}

fn toy_word(rng: &mut ChaCha8Rng) -> String {
    let len = rng.random_range(2..=5);
    let mut w: String = (0..len)
        .map(|_| CONSONANTS[rng.random_range(0..CONSONANTS.len())])
        .collect();
    let (group, _) = FINAL_GROUPS[rng.random_range(0..FINAL_GROUPS.len())];
    w.push(group[rng.random_range(0..group.len())]);
    w
}

/// A corpus where the tag is a deterministic function of the word's final
/// character: learnable by a character model, opaque to a majority class.
pub fn toy_corpus(n_sentences: usize, seed: u64) -> Vec<Sentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_sentences)
        .map(|_| {
            let len = rng.random_range(3..=7);
            let tokens: Vec<Token> = (0..len)
                .map(|i| {
                    let form = toy_word(&mut rng);
                    let upos = toy_tag_for(&form).to_string();
                    Token {
                        form,
                        upos,
                        feats: "_".to_string(),
                        head: if i == 0 { 0 } else { 1 },
                        deprel: if i == 0 { "root" } else { "dep" }.to_string(),
                    }
                })
                .collect();
            Sentence { tokens }
        })
        .collect()
}

/// Fraction of tokens carrying the most frequent tag.
pub fn majority_baseline(sentences: &[Sentence]) -> f64 {
    let mut counts = std::collections::HashMap::new();
    let mut total = 0u64;
    for s in sentences {
        for t in &s.tokens {
            *counts.entry(t.upos.clone()).or_insert(0u64) += 1;
            total += 1;
        }
    }
    *counts.values().max().unwrap() as f64 / total as f64
}

/// Random sentences over a fixed small lexicon with a fixed tag set;
/// syntactically a flat tree so all three tasks are defined.
pub fn random_sentences(n: usize, max_len: usize, seed: u64) -> Vec<Sentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lexicon = [
        "the",
        "a",
        "cat",
        "dog",
        "runs",
        "sleeps",
        "quickly",
        "very",
        "big",
        "small",
        "internationalization",
        "x",
        "o'clock",
        "naïve",
        "re-do",
    ];
    let tags = ["DET", "NOUN", "VERB", "ADV", "ADJ"];
    (0..n)
        .map(|_| {
            let len = rng.random_range(1..=max_len.max(1));
            let tokens: Vec<Token> = (0..len)
                .map(|i| Token {
                    form: lexicon[rng.random_range(0..lexicon.len())].to_string(),
                    upos: tags[rng.random_range(0..tags.len())].to_string(),
                    feats: if rng.random::<f64>() < 0.5 {
                        "_".to_string()
                    } else {
                        format!(
                            "Number={}",
                            if rng.random::<bool>() { "Sing" } else { "Plur" }
                        )
                    },
                    head: if i == 0 { 0 } else { 1 },
                    deprel: if i == 0 { "root" } else { "dep" }.to_string(),
                })
                .collect();
            Sentence { tokens }
        })
        .collect()
}
