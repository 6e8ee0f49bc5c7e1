//! The tagger network: a character-composition CNN feeding a context CNN
//! over a fixed window, a ReLU hidden layer and a softmax prediction layer.

pub mod features;
pub mod net;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::nn::rng::{derive_seed, Stream};
use crate::nn::{Param, ParamSet, Scalar, Tensor};

pub use features::{encode_chars, featurize, InstanceFeatures};
pub use net::{infer_probs, predict_sentence, train_loss};

/// Which word representation feeds the context window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Word embedding only.
    Word,
    /// Character-composed vector only.
    Char,
    /// Concatenation of both.
    WordChar,
}

impl Mode {
    pub fn uses_words(self) -> bool {
        matches!(self, Mode::Word | Mode::WordChar)
    }

    pub fn uses_chars(self) -> bool {
        matches!(self, Mode::Char | Mode::WordChar)
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Word => "w",
            Mode::Char => "c",
            Mode::WordChar => "wc",
        }
    }
}

/// All architecture hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub mode: Mode,
    pub char_input_len: usize,
    pub char_filter_sizes: Vec<usize>,
    pub char_out_channels: usize,
    pub char_emb_dim: usize,
    pub word_dim: usize,
    pub window_half: usize,
    pub ctx_filter_sizes: Vec<usize>,
    pub ctx_out_channels: usize,
    pub hidden_dim: usize,
    pub dropout_p: f64,
    pub noise_sigma: f64,
    pub pos_emb_dim: usize,
    pub tag_count: usize,
}

impl ModelConfig {
    /// The standard full-size architecture: 32-char input, char filters
    /// 3/5/7/9 with 25 channels (composed dim 100), 64-dim word embeddings,
    /// window 15, stacked context filters 2/3/4/5 with 128 channels (context
    /// dim 512), 512 hidden units, dropout 0.1, noise 0.1.
    pub fn standard(mode: Mode) -> Self {
        ModelConfig {
            mode,
            char_input_len: 32,
            char_filter_sizes: vec![3, 5, 7, 9],
            char_out_channels: 25,
            char_emb_dim: 32,
            word_dim: 64,
            window_half: 7,
            ctx_filter_sizes: vec![2, 3, 4, 5],
            ctx_out_channels: 128,
            hidden_dim: 512,
            dropout_p: 0.1,
            noise_sigma: 0.1,
            pos_emb_dim: 10,
            tag_count: 0,
        }
    }

    pub fn window(&self) -> usize {
        2 * self.window_half + 1
    }

    /// Dimension of the character-composed word vector.
    pub fn composed_dim(&self) -> usize {
        self.char_filter_sizes.len() * self.char_out_channels
    }

    /// Dimension of the pooled context vector.
    pub fn ctx_dim(&self) -> usize {
        self.ctx_filter_sizes.len() * self.ctx_out_channels
    }

    /// Dimension of one word representation under the configured mode.
    pub fn repr_dim(&self) -> usize {
        match self.mode {
            Mode::Word => self.word_dim,
            Mode::Char => self.composed_dim(),
            Mode::WordChar => self.word_dim + self.composed_dim(),
        }
    }

    /// Dimension of one context-window row: representation, binary target
    /// flag, position embedding.
    pub fn row_dim(&self) -> usize {
        self.repr_dim() + 1 + self.pos_emb_dim
    }

    /// Asserts the shape chain holds. Called at parameter construction.
    pub fn validate(&self) {
        assert!(self.char_input_len >= 1);
        assert!(!self.char_filter_sizes.is_empty());
        assert!(self.char_filter_sizes.iter().all(|&k| k >= 1));
        assert!(!self.ctx_filter_sizes.is_empty());
        assert!(self.ctx_filter_sizes.iter().all(|&k| k >= 1));
        assert!(self.char_out_channels >= 1);
        assert!(self.char_emb_dim >= 1);
        assert!(self.word_dim >= 1);
        assert!(self.ctx_out_channels >= 1);
        assert!(self.hidden_dim >= 1);
        assert!(self.pos_emb_dim >= 1);
        assert!(
            self.tag_count >= 1,
            "tag_count must be set before building params"
        );
        assert!((0.0..1.0).contains(&self.dropout_p));
        assert!(self.noise_sigma >= 0.0);
        assert_eq!(self.window(), 2 * self.window_half + 1);
        assert_eq!(
            self.composed_dim(),
            self.char_filter_sizes.len() * self.char_out_channels
        );
        assert_eq!(
            self.ctx_dim(),
            self.ctx_filter_sizes.len() * self.ctx_out_channels
        );
    }
}

/// One convolution filter bank: weights `[k, Din, Dout]` and bias `[Dout]`.
#[derive(Debug, Clone)]
pub struct ConvFilter<F: Scalar> {
    pub weight: Param<F>,
    pub bias: Param<F>,
}

/// Two same-size convolutions applied in sequence.
#[derive(Debug, Clone)]
pub struct StackedFilter<F: Scalar> {
    pub first: ConvFilter<F>,
    pub second: ConvFilter<F>,
}

/// All learnable parameters, always allocated for every group so the
/// initialization stream and the serialized layout do not depend on mode.
#[derive(Debug, Clone)]
pub struct ModelParams<F: Scalar> {
    pub word_emb: Param<F>,
    pub char_emb: Param<F>,
    pub pos_emb: Param<F>,
    pub char_convs: Vec<ConvFilter<F>>,
    pub ctx_convs: Vec<StackedFilter<F>>,
    pub hidden_w: Param<F>,
    pub hidden_b: Param<F>,
    pub output_w: Param<F>,
    pub output_b: Param<F>,
}

impl<F: Scalar> ModelParams<F> {
    /// Initializes parameters from the run seed: embeddings uniform in
    /// (-0.1, 0.1), weights uniform Glorot, biases zero. Draws happen in
    /// canonical parameter order.
    pub fn init(cfg: &ModelConfig, word_count: usize, char_count: usize, seed: u64) -> Self {
        cfg.validate();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, Stream::Init, 0, 0));

        let embedding = |shape: &[usize], rng: &mut ChaCha8Rng| {
            let data = (0..shape.iter().product::<usize>())
                .map(|_| F::from_f64(rng.random_range(-0.1..0.1)))
                .collect();
            Param::new(Tensor::from_vec(shape, data), true)
        };
        let glorot = |shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng| {
            let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..shape.iter().product::<usize>())
                .map(|_| F::from_f64(rng.random_range(-s..s)))
                .collect();
            Param::new(Tensor::from_vec(shape, data), false)
        };
        let zero_bias = |n: usize| Param::new(Tensor::<F>::zeros(&[n]), false);

        let mut word_emb = embedding(&[word_count, cfg.word_dim], &mut rng);
        let mut char_emb = embedding(&[char_count, cfg.char_emb_dim], &mut rng);
        let pos_emb = embedding(&[cfg.window(), cfg.pos_emb_dim], &mut rng);
        // PAD rows start at zero so padding is inert in a fresh model. The
        // draws above still happen, keeping the init stream fixed.
        word_emb.value.row_mut(0).fill(F::ZERO);
        word_emb.avg.row_mut(0).fill(F::ZERO);
        char_emb.value.row_mut(0).fill(F::ZERO);
        char_emb.avg.row_mut(0).fill(F::ZERO);

        let char_convs = cfg
            .char_filter_sizes
            .iter()
            .map(|&k| ConvFilter {
                weight: glorot(
                    &[k, cfg.char_emb_dim, cfg.char_out_channels],
                    k * cfg.char_emb_dim,
                    cfg.char_out_channels,
                    &mut rng,
                ),
                bias: zero_bias(cfg.char_out_channels),
            })
            .collect();

        let row = cfg.row_dim();
        let ctx_convs = cfg
            .ctx_filter_sizes
            .iter()
            .map(|&k| StackedFilter {
                first: ConvFilter {
                    weight: glorot(
                        &[k, row, cfg.ctx_out_channels],
                        k * row,
                        cfg.ctx_out_channels,
                        &mut rng,
                    ),
                    bias: zero_bias(cfg.ctx_out_channels),
                },
                second: ConvFilter {
                    weight: glorot(
                        &[k, cfg.ctx_out_channels, cfg.ctx_out_channels],
                        k * cfg.ctx_out_channels,
                        cfg.ctx_out_channels,
                        &mut rng,
                    ),
                    bias: zero_bias(cfg.ctx_out_channels),
                },
            })
            .collect();

        let hidden_w = glorot(
            &[cfg.ctx_dim(), cfg.hidden_dim],
            cfg.ctx_dim(),
            cfg.hidden_dim,
            &mut rng,
        );
        let hidden_b = zero_bias(cfg.hidden_dim);
        let output_w = glorot(
            &[cfg.hidden_dim, cfg.tag_count],
            cfg.hidden_dim,
            cfg.tag_count,
            &mut rng,
        );
        let output_b = zero_bias(cfg.tag_count);

        ModelParams {
            word_emb,
            char_emb,
            pos_emb,
            char_convs,
            ctx_convs,
            hidden_w,
            hidden_b,
            output_w,
            output_b,
        }
    }

    /// A copy whose working values are the running ASGD averages; used for
    /// dev evaluation during training and as the deliverable model.
    pub fn averaged(&self) -> Self {
        let mut copy = self.clone();
        for i in 0..copy.param_count() {
            let p = copy.param_mut(i);
            p.value = p.avg.clone();
        }
        copy
    }

    /// Converts element type; used to move an f32 model into f64
    /// gradient-check mode.
    pub fn cast<G: Scalar>(&self) -> ModelParams<G> {
        let cast_param = |p: &Param<F>| -> Param<G> {
            Param {
                value: p.value.cast(),
                grad: p.grad.cast(),
                avg: p.avg.cast(),
                is_embedding: p.is_embedding,
            }
        };
        ModelParams {
            word_emb: cast_param(&self.word_emb),
            char_emb: cast_param(&self.char_emb),
            pos_emb: cast_param(&self.pos_emb),
            char_convs: self
                .char_convs
                .iter()
                .map(|f| ConvFilter {
                    weight: cast_param(&f.weight),
                    bias: cast_param(&f.bias),
                })
                .collect(),
            ctx_convs: self
                .ctx_convs
                .iter()
                .map(|s| StackedFilter {
                    first: ConvFilter {
                        weight: cast_param(&s.first.weight),
                        bias: cast_param(&s.first.bias),
                    },
                    second: ConvFilter {
                        weight: cast_param(&s.second.weight),
                        bias: cast_param(&s.second.bias),
                    },
                })
                .collect(),
            hidden_w: cast_param(&self.hidden_w),
            hidden_b: cast_param(&self.hidden_b),
            output_w: cast_param(&self.output_w),
            output_b: cast_param(&self.output_b),
        }
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout {
            n_char_filters: self.char_convs.len(),
            n_ctx_filters: self.ctx_convs.len(),
        }
    }
}

/// Canonical parameter indexing shared by the optimizer, gradient buffers,
/// the gradient checker and the model file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub n_char_filters: usize,
    pub n_ctx_filters: usize,
}

impl ParamLayout {
    pub const WORD_EMB: usize = 0;
    pub const CHAR_EMB: usize = 1;
    pub const POS_EMB: usize = 2;

    pub fn of(cfg: &ModelConfig) -> Self {
        ParamLayout {
            n_char_filters: cfg.char_filter_sizes.len(),
            n_ctx_filters: cfg.ctx_filter_sizes.len(),
        }
    }

    pub fn char_w(&self, i: usize) -> usize {
        3 + 2 * i
    }
    pub fn char_b(&self, i: usize) -> usize {
        4 + 2 * i
    }
    fn ctx_base(&self) -> usize {
        3 + 2 * self.n_char_filters
    }
    pub fn ctx_w1(&self, i: usize) -> usize {
        self.ctx_base() + 4 * i
    }
    pub fn ctx_b1(&self, i: usize) -> usize {
        self.ctx_base() + 4 * i + 1
    }
    pub fn ctx_w2(&self, i: usize) -> usize {
        self.ctx_base() + 4 * i + 2
    }
    pub fn ctx_b2(&self, i: usize) -> usize {
        self.ctx_base() + 4 * i + 3
    }
    pub fn hidden_w(&self) -> usize {
        self.ctx_base() + 4 * self.n_ctx_filters
    }
    pub fn hidden_b(&self) -> usize {
        self.hidden_w() + 1
    }
    pub fn output_w(&self) -> usize {
        self.hidden_w() + 2
    }
    pub fn output_b(&self) -> usize {
        self.hidden_w() + 3
    }
    pub fn count(&self) -> usize {
        self.hidden_w() + 4
    }
}

impl<F: Scalar> ParamSet<F> for ModelParams<F> {
    fn param_count(&self) -> usize {
        self.layout().count()
    }

    fn param(&self, i: usize) -> &Param<F> {
        let layout = self.layout();
        match i {
            0 => &self.word_emb,
            1 => &self.char_emb,
            2 => &self.pos_emb,
            _ => {
                let j = i - 3;
                if j < 2 * layout.n_char_filters {
                    let f = &self.char_convs[j / 2];
                    if j.is_multiple_of(2) {
                        &f.weight
                    } else {
                        &f.bias
                    }
                } else {
                    let j = j - 2 * layout.n_char_filters;
                    if j < 4 * layout.n_ctx_filters {
                        let s = &self.ctx_convs[j / 4];
                        match j % 4 {
                            0 => &s.first.weight,
                            1 => &s.first.bias,
                            2 => &s.second.weight,
                            _ => &s.second.bias,
                        }
                    } else {
                        match j - 4 * layout.n_ctx_filters {
                            0 => &self.hidden_w,
                            1 => &self.hidden_b,
                            2 => &self.output_w,
                            3 => &self.output_b,
                            _ => panic!("parameter index {} out of range", i),
                        }
                    }
                }
            }
        }
    }

    fn param_mut(&mut self, i: usize) -> &mut Param<F> {
        let layout = self.layout();
        match i {
            0 => &mut self.word_emb,
            1 => &mut self.char_emb,
            2 => &mut self.pos_emb,
            _ => {
                let j = i - 3;
                if j < 2 * layout.n_char_filters {
                    let f = &mut self.char_convs[j / 2];
                    if j.is_multiple_of(2) {
                        &mut f.weight
                    } else {
                        &mut f.bias
                    }
                } else {
                    let j = j - 2 * layout.n_char_filters;
                    if j < 4 * layout.n_ctx_filters {
                        let s = &mut self.ctx_convs[j / 4];
                        match j % 4 {
                            0 => &mut s.first.weight,
                            1 => &mut s.first.bias,
                            2 => &mut s.second.weight,
                            _ => &mut s.second.bias,
                        }
                    } else {
                        match j - 4 * layout.n_ctx_filters {
                            0 => &mut self.hidden_w,
                            1 => &mut self.hidden_b,
                            2 => &mut self.output_w,
                            3 => &mut self.output_b,
                            _ => panic!("parameter index {} out of range", i),
                        }
                    }
                }
            }
        }
    }

    fn param_name(&self, i: usize) -> String {
        let layout = self.layout();
        match i {
            0 => "word_emb".to_string(),
            1 => "char_emb".to_string(),
            2 => "pos_emb".to_string(),
            _ => {
                let j = i - 3;
                if j < 2 * layout.n_char_filters {
                    let part = if j.is_multiple_of(2) { "w" } else { "b" };
                    format!("char_conv{}.{}", j / 2, part)
                } else {
                    let j = j - 2 * layout.n_char_filters;
                    if j < 4 * layout.n_ctx_filters {
                        let part = ["w1", "b1", "w2", "b2"][j % 4];
                        format!("ctx_conv{}.{}", j / 4, part)
                    } else {
                        match j - 4 * layout.n_ctx_filters {
                            0 => "hidden.w".to_string(),
                            1 => "hidden.b".to_string(),
                            2 => "output.w".to_string(),
                            _ => "output.b".to_string(),
                        }
                    }
                }
            }
        }
    }
}
