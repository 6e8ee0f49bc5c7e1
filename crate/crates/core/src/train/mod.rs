//! Mini-batch training with dev-set early stopping, token-accuracy
//! evaluation and model serialization.

pub mod batch;
pub mod serialize;

use std::time::Instant;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::corpus::{gold_tags, CorpusError, Sentence, Task, Vocabulary};
use crate::model::{predict_sentence, Mode, ModelConfig, ModelParams};
use crate::nn::rng::{derive_seed, Stream};
use crate::nn::{asgd_step, OptState, Scalar};

pub use batch::{batch_pass, batch_pass_sequential, GradAccum, Instance, BATCH_CHUNK};
pub use serialize::{
    load_model, model_from_bytes, model_to_bytes, save_model, ModelIoError, SavedModel,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training corpus is empty")]
    EmptyTrain,
    #[error("dev corpus is empty")]
    EmptyDev,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Optimization hyper-parameters and run controls.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub l2: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 100,
            learning_rate: 0.1,
            momentum: 0.9,
            l2: 1e-5,
            max_epochs: 30,
            patience: 5,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_accuracy: f64,
    /// Wall clock, informational only; excluded from the TSV rendering so
    /// reports compare byte-identically across runs.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
}

impl TrainReport {
    /// Deterministic TSV: per-epoch loss and dev accuracy plus the chosen
    /// epoch. Wall-clock times are deliberately not included.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("epoch\ttrain_loss\tdev_acc\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{}\t{:.6}\t{:.4}\n",
                e.epoch, e.train_loss, e.dev_accuracy
            ));
        }
        out.push_str(&format!("best_epoch\t{}\n", self.best_epoch));
        out
    }
}

/// A trained model plus its training trajectory.
pub struct TrainOutcome {
    pub model: SavedModel,
    pub report: TrainReport,
}

fn gold_id_table(
    sentences: &[Sentence],
    tags: &[Vec<String>],
    vocab: &Vocabulary,
) -> Vec<Vec<usize>> {
    sentences
        .iter()
        .zip(tags.iter())
        .map(|(_, sent_tags)| {
            sent_tags
                .iter()
                .map(|t| vocab.tag_id(t).expect("training tag is in the tag set"))
                .collect()
        })
        .collect()
}

fn fisher_yates<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

/// Trains a tagger, evaluating on dev with averaged weights after every
/// epoch and returning the averaged weights of the best epoch.
pub fn train(
    train_sents: &[Sentence],
    dev_sents: &[Sentence],
    task: Task,
    mut cfg: ModelConfig,
    tcfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    if train_sents.is_empty() {
        return Err(TrainError::EmptyTrain);
    }
    if dev_sents.is_empty() {
        return Err(TrainError::EmptyDev);
    }
    assert!(tcfg.batch_size >= 1);
    assert!(tcfg.max_epochs >= 1);
    assert!(tcfg.patience <= tcfg.max_epochs);

    let train_tags: Vec<Vec<String>> = train_sents
        .iter()
        .map(|s| gold_tags(s, task))
        .collect::<Result<_, _>>()?;
    let vocab = Vocabulary::from_tagged(train_sents, &train_tags);
    let gold_ids = gold_id_table(train_sents, &train_tags, &vocab);
    cfg.tag_count = vocab.tag_count();
    cfg.validate();

    let mut params: ModelParams<f32> =
        ModelParams::init(&cfg, vocab.word_count(), vocab.char_count(), tcfg.seed);

    let instances: Vec<(usize, usize)> = train_sents
        .iter()
        .enumerate()
        .flat_map(|(si, s)| (0..s.len()).map(move |ti| (si, ti)))
        .collect();
    let steps_per_epoch = instances.len().div_ceil(tcfg.batch_size) as u64;
    // Averaging engages one step into the second epoch.
    let mut opt = OptState::new(
        &params,
        tcfg.learning_rate,
        tcfg.momentum,
        tcfg.l2,
        steps_per_epoch + 1,
    );

    let mut accum = GradAccum::new();
    let mut order: Vec<usize> = (0..instances.len()).collect();
    let mut epochs = Vec::new();
    let mut best: Option<(f64, usize, ModelParams<f32>)> = None;
    let mut since_best = 0usize;

    for epoch in 1..=tcfg.max_epochs {
        let started = Instant::now();
        let mut shuffle_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(tcfg.seed, Stream::Shuffle, epoch as u64, 0));
        fisher_yates(&mut order, &mut shuffle_rng);

        let mut loss_sum = 0.0f64;
        for (bi, batch_idx) in order.chunks(tcfg.batch_size).enumerate() {
            let batch: Vec<Instance> = batch_idx
                .iter()
                .enumerate()
                .map(|(j, &idx)| {
                    let (sentence, token) = instances[idx];
                    let position = (bi * tcfg.batch_size + j) as u64;
                    Instance {
                        sentence,
                        token,
                        seed: derive_seed(tcfg.seed, Stream::Instance, epoch as u64, position),
                    }
                })
                .collect();
            let mean_loss = batch_pass(
                &mut params,
                &cfg,
                &vocab,
                train_sents,
                &gold_ids,
                &batch,
                &mut accum,
            );
            loss_sum += mean_loss.to_f64() * batch.len() as f64;
            asgd_step(&mut params, &mut opt);
        }
        let train_loss = loss_sum / instances.len() as f64;

        let averaged = params.averaged();
        let dev = evaluate(&averaged, &cfg, &vocab, dev_sents, task)?;
        epochs.push(EpochStats {
            epoch,
            train_loss,
            dev_accuracy: dev.accuracy,
            seconds: started.elapsed().as_secs_f64(),
        });

        let improved = match &best {
            None => true,
            Some((best_acc, _, _)) => dev.accuracy > *best_acc,
        };
        if improved {
            best = Some((dev.accuracy, epoch, averaged));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if since_best >= tcfg.patience {
            break;
        }
    }

    let (_, best_epoch, best_params) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model: SavedModel {
            task,
            config: cfg,
            train_config: tcfg.clone(),
            vocab,
            params: best_params,
        },
        report: TrainReport { epochs, best_epoch },
    })
}

/// Token-level accuracy counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub accuracy: f64,
    pub correct: u64,
    pub total: u64,
}

fn score_sentence<F: Scalar>(
    sentence: &Sentence,
    gold: &[String],
    params: &ModelParams<F>,
    cfg: &ModelConfig,
    vocab: &Vocabulary,
) -> (u64, u64) {
    let predicted = predict_sentence(sentence, params, cfg, vocab);
    let correct = predicted
        .iter()
        .zip(gold.iter())
        .filter(|(p, g)| p == g)
        .count() as u64;
    (correct, sentence.len() as u64)
}

/// Token accuracy of a model on a corpus. Gold tags outside the training
/// tag set can never be predicted and therefore count as errors.
pub fn evaluate<F: Scalar>(
    params: &ModelParams<F>,
    cfg: &ModelConfig,
    vocab: &Vocabulary,
    data: &[Sentence],
    task: Task,
) -> Result<EvalResult, CorpusError> {
    assert!(!data.is_empty(), "evaluation corpus must be non-empty");
    let gold: Vec<Vec<String>> = data
        .iter()
        .map(|s| gold_tags(s, task))
        .collect::<Result<_, _>>()?;
    #[cfg(feature = "parallel")]
    let counts: Vec<(u64, u64)> = data
        .par_iter()
        .zip(gold.par_iter())
        .map(|(s, g)| score_sentence(s, g, params, cfg, vocab))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let counts: Vec<(u64, u64)> = data
        .iter()
        .zip(gold.iter())
        .map(|(s, g)| score_sentence(s, g, params, cfg, vocab))
        .collect();
    let (correct, total) = counts
        .into_iter()
        .fold((0u64, 0u64), |(c, t), (dc, dt)| (c + dc, t + dt));
    Ok(EvalResult {
        accuracy: correct as f64 / total as f64,
        correct,
        total,
    })
}

/// Sequential twin of [`evaluate`] for benchmarking the parallel speedup.
pub fn evaluate_sequential<F: Scalar>(
    params: &ModelParams<F>,
    cfg: &ModelConfig,
    vocab: &Vocabulary,
    data: &[Sentence],
    task: Task,
) -> Result<EvalResult, CorpusError> {
    assert!(!data.is_empty(), "evaluation corpus must be non-empty");
    let gold: Vec<Vec<String>> = data
        .iter()
        .map(|s| gold_tags(s, task))
        .collect::<Result<_, _>>()?;
    let (correct, total) = data
        .iter()
        .zip(gold.iter())
        .map(|(s, g)| score_sentence(s, g, params, cfg, vocab))
        .fold((0u64, 0u64), |(c, t), (dc, dt)| (c + dc, t + dt));
    Ok(EvalResult {
        accuracy: correct as f64 / total as f64,
        correct,
        total,
    })
}

/// The reduced architecture used by tests and examples where the standard
/// dimensions would be needlessly slow.
pub fn small_config(mode: Mode) -> ModelConfig {
    ModelConfig {
        mode,
        char_input_len: 12,
        char_filter_sizes: vec![2, 3],
        char_out_channels: 8,
        char_emb_dim: 8,
        word_dim: 12,
        window_half: 2,
        ctx_filter_sizes: vec![2, 3],
        ctx_out_channels: 12,
        hidden_dim: 24,
        dropout_p: 0.1,
        noise_sigma: 0.1,
        pos_emb_dim: 4,
        tag_count: 0,
    }
}
