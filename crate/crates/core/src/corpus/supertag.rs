//! Dependency-based supertag extraction.
//!
//! Each tag combines the dependency label with the head direction (`L`,
//! `R`, or `N` for the root) and markers for the presence of left and right
//! dependents: `<deprel>/<dir>[+L][+R]`, `+L` always before `+R`.

use super::{CorpusError, Sentence};

/// Extracts one supertag per token. The sentence must form a single-rooted
/// acyclic tree.
pub fn extract(sentence: &Sentence) -> Result<Vec<String>, CorpusError> {
    validate_tree(sentence)?;
    let n = sentence.len();
    let mut has_left = vec![false; n + 1];
    let mut has_right = vec![false; n + 1];
    for (pos, token) in sentence.tokens.iter().enumerate() {
        let idx = pos + 1;
        if token.head > 0 {
            if idx < token.head {
                has_left[token.head] = true;
            } else {
                has_right[token.head] = true;
            }
        }
    }

    Ok(sentence
        .tokens
        .iter()
        .enumerate()
        .map(|(pos, token)| {
            let idx = pos + 1;
            let dir = if token.head == 0 {
                "N"
            } else if token.head < idx {
                "L"
            } else {
                "R"
            };
            let mut tag = format!("{}/{}", token.deprel, dir);
            if has_left[idx] {
                tag.push_str("+L");
            }
            if has_right[idx] {
                tag.push_str("+R");
            }
            tag
        })
        .collect())
}

fn validate_tree(sentence: &Sentence) -> Result<(), CorpusError> {
    let n = sentence.len();
    let err = |reason: String| CorpusError::NotATree {
        snippet: sentence.snippet(),
        reason,
    };
    let mut roots = 0usize;
    for (pos, token) in sentence.tokens.iter().enumerate() {
        if token.head > n {
            return Err(err(format!(
                "token {} has HEAD {} but the sentence has {} tokens",
                pos + 1,
                token.head,
                n
            )));
        }
        if token.head == pos + 1 {
            return Err(err(format!("token {} is its own head", pos + 1)));
        }
        if token.head == 0 {
            roots += 1;
        }
    }
    if roots != 1 {
        return Err(err(format!("expected exactly 1 root, found {}", roots)));
    }
    // Every token must reach the root within n steps.
    for start in 1..=n {
        let mut cur = start;
        let mut steps = 0;
        while cur != 0 {
            cur = sentence.tokens[cur - 1].head;
            steps += 1;
            if steps > n {
                return Err(err(format!("cycle reachable from token {}", start)));
            }
        }
    }
    Ok(())
}
