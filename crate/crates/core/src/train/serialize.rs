//! The model file: a single self-describing binary holding the
//! configuration, the vocabulary and the averaged parameter tensors.
//!
//! Layout (all integers and floats little-endian):
//! magic `CNNTAG`, format version, task, mode, model config, train config,
//! vocabulary (words with frequencies, characters, tags), then one record
//! per parameter in canonical order: embedding flag, shape, f32 data.
//! Save -> load -> save is byte-identical and a loaded model predicts
//! bit-identically to the saved one.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::corpus::{Task, Vocabulary};
use crate::model::{Mode, ModelConfig, ModelParams};
use crate::nn::{Param, ParamSet, Tensor};
use crate::train::TrainConfig;

const MAGIC: &[u8; 6] = b"CNNTAG";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("model file truncated while reading {0}")]
    Truncated(&'static str),
    #[error("invalid model file: {0}")]
    Invalid(String),
}

/// Everything needed to run a trained tagger.
#[derive(Debug, Clone)]
pub struct SavedModel {
    pub task: Task,
    pub config: ModelConfig,
    pub train_config: TrainConfig,
    pub vocab: Vocabulary,
    pub params: ModelParams<f32>,
}

pub fn save_model(model: &SavedModel, path: &Path) -> Result<(), ModelIoError> {
    fs::write(path, model_to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SavedModel, ModelIoError> {
    let bytes = fs::read(path)?;
    model_from_bytes(&bytes)
}

pub fn model_to_bytes(model: &SavedModel) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.u8(match model.task {
        Task::Pos => 0,
        Task::Morph => 1,
        Task::Stag => 2,
    });
    w.u8(match model.config.mode {
        Mode::Word => 0,
        Mode::Char => 1,
        Mode::WordChar => 2,
    });

    let cfg = &model.config;
    w.u32(cfg.char_input_len as u32);
    w.u32(cfg.char_filter_sizes.len() as u32);
    for &k in &cfg.char_filter_sizes {
        w.u32(k as u32);
    }
    w.u32(cfg.char_out_channels as u32);
    w.u32(cfg.char_emb_dim as u32);
    w.u32(cfg.word_dim as u32);
    w.u32(cfg.window_half as u32);
    w.u32(cfg.ctx_filter_sizes.len() as u32);
    for &k in &cfg.ctx_filter_sizes {
        w.u32(k as u32);
    }
    w.u32(cfg.ctx_out_channels as u32);
    w.u32(cfg.hidden_dim as u32);
    w.u32(cfg.pos_emb_dim as u32);
    w.u32(cfg.tag_count as u32);
    w.f64(cfg.dropout_p);
    w.f64(cfg.noise_sigma);

    let tc = &model.train_config;
    w.u32(tc.batch_size as u32);
    w.f64(tc.learning_rate);
    w.f64(tc.momentum);
    w.f64(tc.l2);
    w.u32(tc.max_epochs as u32);
    w.u32(tc.patience as u32);
    w.u64(tc.seed);

    let vocab = &model.vocab;
    w.u32(vocab.observed_words().len() as u32);
    for word in vocab.observed_words() {
        w.string(word);
        w.u64(vocab.word_freq(word));
    }
    w.u32(vocab.observed_chars().len() as u32);
    for &c in vocab.observed_chars() {
        w.u32(c as u32);
    }
    w.u32(vocab.tags().len() as u32);
    for tag in vocab.tags() {
        w.string(tag);
    }

    w.u32(model.params.param_count() as u32);
    for i in 0..model.params.param_count() {
        let p = model.params.param(i);
        w.u8(p.is_embedding as u8);
        w.u8(p.value.shape().len() as u8);
        for &d in p.value.shape() {
            w.u32(d as u32);
        }
        // Averaged weights are the deliverable.
        for &v in p.avg.data() {
            w.bytes(&v.to_le_bytes());
        }
    }
    w.out
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<SavedModel, ModelIoError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(6, "magic")?;
    if magic != MAGIC {
        return Err(ModelIoError::BadMagic);
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(ModelIoError::UnsupportedVersion(version));
    }
    let task = match r.u8("task")? {
        0 => Task::Pos,
        1 => Task::Morph,
        2 => Task::Stag,
        t => return Err(ModelIoError::Invalid(format!("unknown task code {}", t))),
    };
    let mode = match r.u8("mode")? {
        0 => Mode::Word,
        1 => Mode::Char,
        2 => Mode::WordChar,
        m => return Err(ModelIoError::Invalid(format!("unknown mode code {}", m))),
    };

    let char_input_len = r.u32("char_input_len")? as usize;
    let n_char_filters = r.u32("char filter count")? as usize;
    let char_filter_sizes = (0..n_char_filters)
        .map(|_| r.u32("char filter size").map(|v| v as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let char_out_channels = r.u32("char_out_channels")? as usize;
    let char_emb_dim = r.u32("char_emb_dim")? as usize;
    let word_dim = r.u32("word_dim")? as usize;
    let window_half = r.u32("window_half")? as usize;
    let n_ctx_filters = r.u32("ctx filter count")? as usize;
    let ctx_filter_sizes = (0..n_ctx_filters)
        .map(|_| r.u32("ctx filter size").map(|v| v as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let ctx_out_channels = r.u32("ctx_out_channels")? as usize;
    let hidden_dim = r.u32("hidden_dim")? as usize;
    let pos_emb_dim = r.u32("pos_emb_dim")? as usize;
    let tag_count = r.u32("tag_count")? as usize;
    let dropout_p = r.f64("dropout_p")?;
    let noise_sigma = r.f64("noise_sigma")?;
    let config = ModelConfig {
        mode,
        char_input_len,
        char_filter_sizes,
        char_out_channels,
        char_emb_dim,
        word_dim,
        window_half,
        ctx_filter_sizes,
        ctx_out_channels,
        hidden_dim,
        dropout_p,
        noise_sigma,
        pos_emb_dim,
        tag_count,
    };

    let train_config = TrainConfig {
        batch_size: r.u32("batch_size")? as usize,
        learning_rate: r.f64("learning_rate")?,
        momentum: r.f64("momentum")?,
        l2: r.f64("l2")?,
        max_epochs: r.u32("max_epochs")? as usize,
        patience: r.u32("patience")? as usize,
        seed: r.u64("seed")?,
    };

    let n_words = r.u32("word count")? as usize;
    let mut words = Vec::with_capacity(n_words);
    let mut freqs = Vec::with_capacity(n_words);
    for _ in 0..n_words {
        words.push(r.string("word")?);
        freqs.push(r.u64("word frequency")?);
    }
    let n_chars = r.u32("char count")? as usize;
    let chars = (0..n_chars)
        .map(|_| {
            let code = r.u32("char codepoint")?;
            char::from_u32(code)
                .ok_or_else(|| ModelIoError::Invalid(format!("bad codepoint {}", code)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n_tags = r.u32("tag count")? as usize;
    let tags = (0..n_tags)
        .map(|_| r.string("tag"))
        .collect::<Result<Vec<_>, _>>()?;
    let vocab = Vocabulary::from_parts(words, freqs, chars, tags);

    if vocab.tag_count() != config.tag_count {
        return Err(ModelIoError::Invalid(format!(
            "tag_count {} does not match vocabulary ({})",
            config.tag_count,
            vocab.tag_count()
        )));
    }

    // Zero skeleton with the canonical layout, then fill from the file.
    let mut params: ModelParams<f32> = zero_params(&config, vocab.word_count(), vocab.char_count());
    let n_params = r.u32("parameter count")? as usize;
    if n_params != params.param_count() {
        return Err(ModelIoError::Invalid(format!(
            "expected {} parameters, file has {}",
            params.param_count(),
            n_params
        )));
    }
    for i in 0..n_params {
        let is_embedding = r.u8("embedding flag")? != 0;
        let ndim = r.u8("shape rank")? as usize;
        let shape = (0..ndim)
            .map(|_| r.u32("shape dim").map(|v| v as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let expected = params.param(i).value.shape().to_vec();
        if shape != expected || is_embedding != params.param(i).is_embedding {
            return Err(ModelIoError::Invalid(format!(
                "parameter {} ({}) has shape {:?}, expected {:?}",
                i,
                params.param_name(i),
                shape,
                expected
            )));
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(r.f32("parameter data")?);
        }
        let tensor = Tensor::from_vec(&shape, data);
        let p = params.param_mut(i);
        p.value = tensor.clone();
        p.avg = tensor;
    }
    if r.pos != bytes.len() {
        return Err(ModelIoError::Invalid(format!(
            "{} trailing bytes after parameters",
            bytes.len() - r.pos
        )));
    }

    Ok(SavedModel {
        task,
        config,
        train_config,
        vocab,
        params,
    })
}

fn zero_params(cfg: &ModelConfig, word_count: usize, char_count: usize) -> ModelParams<f32> {
    use crate::model::{ConvFilter, StackedFilter};
    cfg.validate();
    let emb = |shape: &[usize]| Param::new(Tensor::<f32>::zeros(shape), true);
    let weight = |shape: &[usize]| Param::new(Tensor::<f32>::zeros(shape), false);
    let row = cfg.row_dim();
    ModelParams {
        word_emb: emb(&[word_count, cfg.word_dim]),
        char_emb: emb(&[char_count, cfg.char_emb_dim]),
        pos_emb: emb(&[cfg.window(), cfg.pos_emb_dim]),
        char_convs: cfg
            .char_filter_sizes
            .iter()
            .map(|&k| ConvFilter {
                weight: weight(&[k, cfg.char_emb_dim, cfg.char_out_channels]),
                bias: weight(&[cfg.char_out_channels]),
            })
            .collect(),
        ctx_convs: cfg
            .ctx_filter_sizes
            .iter()
            .map(|&k| StackedFilter {
                first: ConvFilter {
                    weight: weight(&[k, row, cfg.ctx_out_channels]),
                    bias: weight(&[cfg.ctx_out_channels]),
                },
                second: ConvFilter {
                    weight: weight(&[k, cfg.ctx_out_channels, cfg.ctx_out_channels]),
                    bias: weight(&[cfg.ctx_out_channels]),
                },
            })
            .collect(),
        hidden_w: weight(&[cfg.ctx_dim(), cfg.hidden_dim]),
        hidden_b: weight(&[cfg.hidden_dim]),
        output_w: weight(&[cfg.hidden_dim, cfg.tag_count]),
        output_b: weight(&[cfg.tag_count]),
    }
}

#[derive(Default)]
struct Writer {
    out: Vec<u8>,
}

impl Writer {
    fn bytes(&mut self, b: &[u8]) {
        self.out.extend_from_slice(b);
    }
    fn u8(&mut self, v: u8) {
        self.out.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }
    fn string(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], ModelIoError> {
        if self.pos + n > self.bytes.len() {
            return Err(ModelIoError::Truncated(what));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
    fn u8(&mut self, what: &'static str) -> Result<u8, ModelIoError> {
        Ok(self.take(1, what)?[0])
    }
    fn u32(&mut self, what: &'static str) -> Result<u32, ModelIoError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
    fn u64(&mut self, what: &'static str) -> Result<u64, ModelIoError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn f32(&mut self, what: &'static str) -> Result<f32, ModelIoError> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
    fn f64(&mut self, what: &'static str) -> Result<f64, ModelIoError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn string(&mut self, what: &'static str) -> Result<String, ModelIoError> {
        let len = self.u32(what)? as usize;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| ModelIoError::Invalid(format!("non-UTF-8 {}", what)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;
    use crate::corpus::testutil::words;
    use crate::train::small_config;

    fn fresh_model() -> SavedModel {
        let corpus = vec![words(&["alpha", "beta"]), words(&["gamma"])];
        let vocab = build_vocab(&corpus, Task::Pos).unwrap();
        let mut config = small_config(Mode::WordChar);
        config.tag_count = vocab.tag_count();
        let params = ModelParams::init(&config, vocab.word_count(), vocab.char_count(), 99);
        SavedModel {
            task: Task::Pos,
            config,
            train_config: TrainConfig::default(),
            vocab,
            params,
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let model = fresh_model();
        let bytes = model_to_bytes(&model);
        let loaded = model_from_bytes(&bytes).unwrap();
        let again = model_to_bytes(&loaded);
        assert_eq!(bytes, again);
    }

    #[test]
    fn loaded_value_equals_stored_average() {
        let model = fresh_model();
        let bytes = model_to_bytes(&model);
        let loaded = model_from_bytes(&bytes).unwrap();
        for i in 0..model.params.param_count() {
            assert_eq!(
                loaded.params.param(i).value.data(),
                model.params.param(i).avg.data()
            );
            assert_eq!(
                loaded.params.param(i).value.data(),
                loaded.params.param(i).avg.data()
            );
        }
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = model_to_bytes(&fresh_model());
        bytes[0] = b'X';
        assert!(matches!(
            model_from_bytes(&bytes),
            Err(ModelIoError::BadMagic)
        ));
    }

    #[test]
    fn unsupported_version_is_rejected() {
        let mut bytes = model_to_bytes(&fresh_model());
        bytes[6..10].copy_from_slice(&99u32.to_le_bytes());
        assert!(matches!(
            model_from_bytes(&bytes),
            Err(ModelIoError::UnsupportedVersion(99))
        ));
    }

    #[test]
    fn truncation_is_an_error_not_a_crash() {
        let bytes = model_to_bytes(&fresh_model());
        for cut in [5usize, 11, 40, bytes.len() / 2, bytes.len() - 1] {
            let err = model_from_bytes(&bytes[..cut]).unwrap_err();
            assert!(
                matches!(err, ModelIoError::Truncated(_) | ModelIoError::BadMagic),
                "cut {} gave {:?}",
                cut,
                err
            );
        }
    }

    #[test]
    fn trailing_garbage_is_rejected() {
        let mut bytes = model_to_bytes(&fresh_model());
        bytes.push(0);
        assert!(matches!(
            model_from_bytes(&bytes),
            Err(ModelIoError::Invalid(_))
        ));
    }
}
