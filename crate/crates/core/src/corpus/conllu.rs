//! Reading and writing the 10-column tab-separated CoNLL-U format.
//!
//! Sentences are separated by blank lines, `#` starts a comment,
//! multiword-token ranges (`1-2`) and empty nodes (`1.1`) are skipped so a
//! parsed [`Sentence`] holds syntactic words only.

use super::{CorpusError, Sentence, Token};

const COLUMNS: usize = 10;

/// Parses CoNLL-U text into sentences. Empty input yields an empty list.
pub fn parse_conllu(text: &str) -> Result<Vec<Sentence>, CorpusError> {
    Ok(parse_conllu_with_lines(text)?
        .into_iter()
        .map(|(s, _)| s)
        .collect())
}

/// Like [`parse_conllu`], additionally reporting for every token the
/// 0-based index of its line in `text`. File-rewriting commands use the
/// indices to edit single columns in place.
pub fn parse_conllu_with_lines(text: &str) -> Result<Vec<(Sentence, Vec<usize>)>, CorpusError> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut token_lines: Vec<usize> = Vec::new();

    for (idx, raw) in text.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            flush(&mut sentences, &mut tokens, &mut token_lines)?;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != COLUMNS {
            return Err(CorpusError::Parse {
                line: idx + 1,
                reason: format!(
                    "expected {} tab-separated columns, found {}",
                    COLUMNS,
                    cols.len()
                ),
            });
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            // Multiword-token range or empty node: not a syntactic word.
            continue;
        }
        let _: usize = id.parse().map_err(|_| CorpusError::Parse {
            line: idx + 1,
            reason: format!("unparsable token ID {:?}", id),
        })?;
        let head: usize = cols[6].parse().map_err(|_| CorpusError::Parse {
            line: idx + 1,
            reason: format!("unparsable HEAD {:?}", cols[6]),
        })?;
        if cols[1].is_empty() {
            return Err(CorpusError::Parse {
                line: idx + 1,
                reason: "empty FORM".to_string(),
            });
        }
        tokens.push(Token {
            form: cols[1].to_string(),
            upos: cols[3].to_string(),
            feats: cols[5].to_string(),
            head,
            deprel: cols[7].to_string(),
        });
        token_lines.push(idx);
    }
    flush(&mut sentences, &mut tokens, &mut token_lines)?;
    Ok(sentences)
}

fn flush(
    sentences: &mut Vec<(Sentence, Vec<usize>)>,
    tokens: &mut Vec<Token>,
    token_lines: &mut Vec<usize>,
) -> Result<(), CorpusError> {
    if tokens.is_empty() {
        token_lines.clear();
        return Ok(());
    }
    let n = tokens.len();
    for (pos, token) in tokens.iter().enumerate() {
        if token.head > n || token.head == pos + 1 {
            return Err(CorpusError::Parse {
                line: token_lines[pos] + 1,
                reason: format!(
                    "HEAD {} is not 0 or the index of another token (sentence has {})",
                    token.head, n
                ),
            });
        }
    }
    sentences.push((
        Sentence {
            tokens: std::mem::take(tokens),
        },
        std::mem::take(token_lines),
    ));
    Ok(())
}

/// Serializes sentences back to CoNLL-U. Unknown columns are written as `_`.
pub fn write_conllu(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for sentence in sentences {
        for (i, t) in sentence.tokens.iter().enumerate() {
            out.push_str(&format!(
                "{}\t{}\t_\t{}\t_\t{}\t{}\t{}\t_\t_\n",
                i + 1,
                t.form,
                t.upos,
                t.feats,
                t.head,
                t.deprel
            ));
        }
        out.push('\n');
    }
    out
}

/// Which column a predicted tag lands in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagColumn {
    Upos,
    Feats,
    /// `Stag=<tag>` attribute in MISC; an existing `Stag=` entry is replaced.
    StagMisc,
}

/// Rewrites one tag column of `text` with `tags` (one Vec per sentence, one
/// tag per token). All other bytes are preserved.
pub fn rewrite_tags(
    text: &str,
    tags: &[Vec<String>],
    column: TagColumn,
) -> Result<String, CorpusError> {
    let parsed = parse_conllu_with_lines(text)?;
    assert_eq!(parsed.len(), tags.len(), "one tag sequence per sentence");
    let mut lines: Vec<String> = text.split('\n').map(|l| l.to_string()).collect();
    for ((sentence, token_lines), sent_tags) in parsed.iter().zip(tags.iter()) {
        assert_eq!(sentence.len(), sent_tags.len(), "one tag per token");
        for (line_idx, tag) in token_lines.iter().zip(sent_tags.iter()) {
            let mut cols: Vec<String> = lines[*line_idx].split('\t').map(String::from).collect();
            match column {
                TagColumn::Upos => cols[3] = tag.clone(),
                TagColumn::Feats => cols[5] = tag.clone(),
                TagColumn::StagMisc => cols[9] = set_misc_stag(&cols[9], tag),
            }
            lines[*line_idx] = cols.join("\t");
        }
    }
    Ok(lines.join("\n"))
}

fn set_misc_stag(misc: &str, tag: &str) -> String {
    let (core, cr) = match misc.strip_suffix('\r') {
        Some(core) => (core, "\r"),
        None => (misc, ""),
    };
    let mut attrs: Vec<&str> = if core == "_" || core.is_empty() {
        Vec::new()
    } else {
        core.split('|')
            .filter(|a| !a.starts_with("Stag="))
            .collect()
    };
    let stag = format!("Stag={}", tag);
    attrs.push(&stag);
    format!("{}{}", attrs.join("|"), cr)
}

/// Rewrites the FORM column of `text` with the given replacements (one
/// Vec per sentence, `None` leaves a token unchanged). All other bytes are
/// preserved.
pub fn rewrite_forms(text: &str, forms: &[Vec<Option<String>>]) -> Result<String, CorpusError> {
    let parsed = parse_conllu_with_lines(text)?;
    assert_eq!(parsed.len(), forms.len(), "one form sequence per sentence");
    let mut lines: Vec<String> = text.split('\n').map(|l| l.to_string()).collect();
    for ((sentence, token_lines), sent_forms) in parsed.iter().zip(forms.iter()) {
        assert_eq!(sentence.len(), sent_forms.len(), "one entry per token");
        for (line_idx, replacement) in token_lines.iter().zip(sent_forms.iter()) {
            if let Some(new_form) = replacement {
                let mut cols: Vec<String> =
                    lines[*line_idx].split('\t').map(String::from).collect();
                cols[1] = new_form.clone();
                lines[*line_idx] = cols.join("\t");
            }
        }
    }
    Ok(lines.join("\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_TOKENS: &str =
        "1\tHe\t_\tPRON\t_\t_\t2\tnsubj\t_\t_\n2\truns\t_\tVERB\t_\t_\t0\troot\t_\t_\n";

    #[test]
    fn empty_input_is_empty_list() {
        assert_eq!(parse_conllu("").unwrap(), Vec::<Sentence>::new());
    }

    #[test]
    fn two_line_block() {
        let sentences = parse_conllu(TWO_TOKENS).unwrap();
        assert_eq!(sentences.len(), 1);
        let s = &sentences[0];
        assert_eq!(s.len(), 2);
        assert_eq!(s.tokens[0].form, "He");
        assert_eq!(s.tokens[0].head, 2);
        assert_eq!(s.tokens[1].head, 0);
    }

    #[test]
    fn range_lines_and_empty_nodes_are_skipped() {
        let text = "1-2\tdel\t_\t_\t_\t_\t_\t_\t_\t_\n\
                    1\tde\t_\tADP\t_\t_\t2\tcase\t_\t_\n\
                    2\tel\t_\tDET\t_\t_\t0\troot\t_\t_\n\
                    2.1\tghost\t_\t_\t_\t_\t_\t_\t_\t_\n";
        let sentences = parse_conllu(text).unwrap();
        assert_eq!(sentences.len(), 1);
        assert_eq!(sentences[0].len(), 2);
        assert_eq!(sentences[0].tokens[0].form, "de");
    }

    #[test]
    fn comments_are_skipped() {
        let text = format!("# sent_id = 1\n# text = He runs\n{}", TWO_TOKENS);
        let sentences = parse_conllu(&text).unwrap();
        assert_eq!(sentences.len(), 1);
        assert_eq!(sentences[0].len(), 2);
    }

    #[test]
    fn wrong_column_count_names_line() {
        let err = parse_conllu("1\tHe\tPRON\n").unwrap_err();
        match err {
            CorpusError::Parse { line, reason } => {
                assert_eq!(line, 1);
                assert!(reason.contains("columns"));
            }
            other => panic!("unexpected error {:?}", other),
        }
    }

    #[test]
    fn unparsable_head_names_line() {
        let text = "# c\n1\tHe\t_\tPRON\t_\t_\tx\tnsubj\t_\t_\n";
        let err = parse_conllu(text).unwrap_err();
        match err {
            CorpusError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {:?}", other),
        }
    }

    #[test]
    fn head_out_of_range_is_rejected() {
        let text = "1\tHe\t_\tPRON\t_\t_\t3\tnsubj\t_\t_\n2\truns\t_\tVERB\t_\t_\t0\troot\t_\t_\n";
        assert!(parse_conllu(text).is_err());
    }

    #[test]
    fn self_head_is_rejected() {
        let text = "1\tHe\t_\tPRON\t_\t_\t1\tnsubj\t_\t_\n";
        assert!(parse_conllu(text).is_err());
    }

    #[test]
    fn round_trip_preserves_fields() {
        let text = "1\tHe\the\tPRON\tPRP\tCase=Nom\t2\tnsubj\t_\tSpaceAfter=No\n2\truns\t_\tVERB\t_\t_\t0\troot\t_\t_\n";
        let first = parse_conllu(text).unwrap();
        let rewritten = write_conllu(&first);
        let second = parse_conllu(&rewritten).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn rewrite_upos_touches_only_that_column() {
        let out = rewrite_tags(
            TWO_TOKENS,
            &[vec!["A".to_string(), "B".to_string()]],
            TagColumn::Upos,
        )
        .unwrap();
        let reparsed = parse_conllu(&out).unwrap();
        assert_eq!(reparsed[0].tokens[0].upos, "A");
        assert_eq!(reparsed[0].tokens[0].form, "He");
        // FORM, HEAD, DEPREL columns untouched byte-for-byte.
        for (orig, new) in TWO_TOKENS.split('\n').zip(out.split('\n')) {
            if orig.is_empty() {
                continue;
            }
            let o: Vec<&str> = orig.split('\t').collect();
            let n: Vec<&str> = new.split('\t').collect();
            for c in [0usize, 1, 2, 4, 5, 6, 7, 8, 9] {
                assert_eq!(o[c], n[c]);
            }
        }
    }

    #[test]
    fn misc_stag_is_replaced_idempotently() {
        assert_eq!(set_misc_stag("_", "obj/L"), "Stag=obj/L");
        assert_eq!(
            set_misc_stag("SpaceAfter=No", "obj/L"),
            "SpaceAfter=No|Stag=obj/L"
        );
        assert_eq!(
            set_misc_stag("SpaceAfter=No|Stag=old/R", "obj/L"),
            "SpaceAfter=No|Stag=obj/L"
        );
    }

    #[test]
    fn rewrite_forms_preserves_unedited_bytes() {
        let out = rewrite_forms(TWO_TOKENS, &[vec![None, Some("walks".to_string())]]).unwrap();
        assert!(out.contains("\twalks\t"));
        assert!(out.starts_with("1\tHe\t_\tPRON"));
    }
}
