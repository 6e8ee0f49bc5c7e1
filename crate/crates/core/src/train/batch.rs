//! Mini-batch gradient accumulation.
//!
//! A batch is split into fixed-size chunks. Each chunk accumulates its
//! instances sequentially into its own buffer; buffers then reduce into the
//! parameter gradients in chunk order. The chunk structure is identical
//! whether chunks run on rayon or inline, so gradients are bit-identical
//! for any thread count, including the sequential fallback.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::corpus::{Sentence, Vocabulary};
use crate::model::{featurize, train_loss, ModelConfig, ModelParams};
use crate::nn::{ParamSet, Scalar, Tensor};

/// Instances per chunk. Fixed so the reduction tree never depends on the
/// number of worker threads.
pub const BATCH_CHUNK: usize = 10;

/// One training instance with its derived RNG seed (UNK replacement,
/// composed-vector noise, dropout).
#[derive(Debug, Clone, Copy)]
pub struct Instance {
    pub sentence: usize,
    pub token: usize,
    pub seed: u64,
}

/// Reusable per-chunk gradient buffers.
pub struct GradAccum<F: Scalar> {
    buffers: Vec<Vec<Tensor<F>>>,
}

impl<F: Scalar> GradAccum<F> {
    pub fn new() -> Self {
        GradAccum {
            buffers: Vec::new(),
        }
    }

    fn ensure(&mut self, chunks: usize, params: &ModelParams<F>) {
        while self.buffers.len() < chunks {
            self.buffers.push(crate::nn::grad_buffers(params));
        }
    }
}

impl<F: Scalar> Default for GradAccum<F> {
    fn default() -> Self {
        Self::new()
    }
}

fn chunk_worker<F: Scalar>(
    chunk: &[Instance],
    sentences: &[Sentence],
    gold_ids: &[Vec<usize>],
    vocab: &Vocabulary,
    cfg: &ModelConfig,
    params: &ModelParams<F>,
    buffer: &mut [Tensor<F>],
) -> F {
    for t in buffer.iter_mut() {
        t.zero();
    }
    let mut loss = F::ZERO;
    for inst in chunk {
        let mut rng = ChaCha8Rng::seed_from_u64(inst.seed);
        let sentence = &sentences[inst.sentence];
        let feats = featurize(sentence, inst.token, vocab, cfg, Some(&mut rng));
        let gold = gold_ids[inst.sentence][inst.token];
        loss += train_loss(&feats, gold, params, cfg, Some(buffer), Some(&mut rng));
    }
    loss
}

fn reduce<F: Scalar>(
    params: &mut ModelParams<F>,
    accum: &GradAccum<F>,
    n_chunks: usize,
    losses: &[F],
    batch_len: usize,
) -> F {
    for buffer in &accum.buffers[..n_chunks] {
        for (i, tensor) in buffer.iter().enumerate() {
            params.param_mut(i).grad.add_assign(tensor);
        }
    }
    let inv = F::ONE / F::from_f64(batch_len as f64);
    for i in 0..params.param_count() {
        params.param_mut(i).grad.scale(inv);
    }
    let mut total = F::ZERO;
    for &l in losses {
        total += l;
    }
    total * inv
}

/// Accumulates the batch-mean gradient into `params.grad` and returns the
/// batch-mean loss. Chunks run in parallel under the `parallel` feature.
pub fn batch_pass<F: Scalar>(
    params: &mut ModelParams<F>,
    cfg: &ModelConfig,
    vocab: &Vocabulary,
    sentences: &[Sentence],
    gold_ids: &[Vec<usize>],
    batch: &[Instance],
    accum: &mut GradAccum<F>,
) -> F {
    #[cfg(feature = "parallel")]
    {
        let chunks: Vec<&[Instance]> = batch.chunks(BATCH_CHUNK).collect();
        accum.ensure(chunks.len(), params);
        let shared: &ModelParams<F> = params;
        let losses: Vec<F> = accum.buffers[..chunks.len()]
            .par_iter_mut()
            .zip(chunks.par_iter())
            .map(|(buffer, chunk)| {
                chunk_worker(chunk, sentences, gold_ids, vocab, cfg, shared, buffer)
            })
            .collect();
        reduce(params, accum, chunks.len(), &losses, batch.len())
    }
    #[cfg(not(feature = "parallel"))]
    {
        batch_pass_sequential(params, cfg, vocab, sentences, gold_ids, batch, accum)
    }
}

/// The sequential implementation of [`batch_pass`]; exposed so benchmarks
/// can compare it against the parallel path.
pub fn batch_pass_sequential<F: Scalar>(
    params: &mut ModelParams<F>,
    cfg: &ModelConfig,
    vocab: &Vocabulary,
    sentences: &[Sentence],
    gold_ids: &[Vec<usize>],
    batch: &[Instance],
    accum: &mut GradAccum<F>,
) -> F {
    let chunks: Vec<&[Instance]> = batch.chunks(BATCH_CHUNK).collect();
    accum.ensure(chunks.len(), params);
    let shared: &ModelParams<F> = params;
    let losses: Vec<F> = accum.buffers[..chunks.len()]
        .iter_mut()
        .zip(chunks.iter())
        .map(|(buffer, chunk)| chunk_worker(chunk, sentences, gold_ids, vocab, cfg, shared, buffer))
        .collect();
    reduce(params, accum, chunks.len(), &losses, batch.len())
}
