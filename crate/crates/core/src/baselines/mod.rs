//! Comparison models: a small MLP policy and a CART tree fit on logged
//! state-action pairs.

mod cart;
mod mlp;

pub use cart::{cart_fit, collect_dataset, training_accuracy, CartDataset, DEFAULT_CART_DEPTH, DEFAULT_CART_SAMPLES};
pub use mlp::{DenseLayer, MlpPolicy};
