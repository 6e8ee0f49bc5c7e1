//! A general-purpose convolutional sequence tagger.
//!
//! One CNN composes word vectors from characters, a second CNN encodes the
//! context window around each token, and a softmax layer predicts the tag.
//! The same architecture serves POS tagging, morphological tagging (the
//! whole FEATS string as one tag) and dependency-based supertagging over
//! CoNLL-U treebanks. Training uses averaged SGD with momentum and the
//! crate ships a text-corruption harness for robustness experiments.
//!
//! With the default `parallel` feature, mini-batch gradients and corpus
//! evaluation fan out over rayon; results are bit-identical to the
//! sequential fallback because work is split into fixed-size chunks that
//! reduce in a fixed order.

pub mod corpus;
pub mod model;
pub mod nn;
pub mod robustness;
pub mod train;
