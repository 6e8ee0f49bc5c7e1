//! Instance features: character encodings and window slot ids.

use rand::Rng;

use crate::corpus::{Sentence, Vocabulary, PAD_ID};

use super::ModelConfig;

/// Probability of replacing a training-frequency-1 word occurrence by UNK
/// during training, so the UNK row receives updates.
pub const UNK_TRAIN_P: f64 = 0.25;

/// Encodes a word form into exactly `input_len` character ids.
///
/// Shorter forms are centered with PAD on both sides (the extra PAD goes
/// right when the deficit is odd); longer forms keep the first
/// `input_len/2` and last `input_len - input_len/2` characters, cutting
/// from the middle. Unknown characters map to UNK.
pub fn encode_chars(form: &str, vocab: &Vocabulary, input_len: usize) -> Vec<usize> {
    let chars: Vec<char> = form.chars().collect();
    let mut ids = vec![PAD_ID; input_len];
    if chars.len() <= input_len {
        let left = (input_len - chars.len()) / 2;
        for (i, &c) in chars.iter().enumerate() {
            ids[left + i] = vocab.char_id(c);
        }
    } else {
        let head = input_len / 2;
        let tail = input_len - head;
        for i in 0..head {
            ids[i] = vocab.char_id(chars[i]);
        }
        for i in 0..tail {
            ids[head + i] = vocab.char_id(chars[chars.len() - tail + i]);
        }
    }
    ids
}

/// Feature ids for one window slot holding a real token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotFeature {
    pub word_id: Option<usize>,
    pub char_ids: Option<Vec<usize>>,
}

/// Input ids for one (sentence, target) instance: `window` slots, `None`
/// where the window extends past the sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceFeatures {
    pub slots: Vec<Option<SlotFeature>>,
}

/// Builds the window features for a target token.
///
/// `unk_rng` is supplied during training only: each occurrence of a word
/// with training frequency 1 is replaced by UNK with probability
/// [`UNK_TRAIN_P`]. Inference passes `None` and maps OOV words to UNK
/// deterministically.
pub fn featurize<R: Rng>(
    sentence: &Sentence,
    target: usize,
    vocab: &Vocabulary,
    cfg: &ModelConfig,
    mut unk_rng: Option<&mut R>,
) -> InstanceFeatures {
    assert!(target < sentence.len());
    let window = cfg.window();
    let mut slots = Vec::with_capacity(window);
    for offset in 0..window {
        let pos = target as isize + offset as isize - cfg.window_half as isize;
        if pos < 0 || pos as usize >= sentence.len() {
            slots.push(None);
            continue;
        }
        let form = &sentence.tokens[pos as usize].form;
        let word_id = if cfg.mode.uses_words() {
            let mut id = vocab.word_id(form);
            if let Some(rng) = unk_rng.as_deref_mut() {
                if vocab.word_freq(form) == 1 && rng.random::<f64>() < UNK_TRAIN_P {
                    id = crate::corpus::UNK_ID;
                }
            }
            Some(id)
        } else {
            None
        };
        let char_ids = if cfg.mode.uses_chars() {
            Some(encode_chars(form, vocab, cfg.char_input_len))
        } else {
            None
        };
        slots.push(Some(SlotFeature { word_id, char_ids }));
    }
    InstanceFeatures { slots }
}
