//! Trace classifier and multi-antenna decision fusion.

mod checkpoint;
mod fusion;
mod gradcheck;
pub mod layers;
mod metrics;
mod network;
mod train;

pub use checkpoint::Model;
pub use fusion::{fuse, FusionResult, FusionRule};
pub use gradcheck::{gradient_check, gradient_check_with, relative_error, GradientCheck};
pub use metrics::{metrics, Metrics};
pub use network::{dropout_mask, softmax, Forward, LayerInfo, LayerKind, Network, NetworkSpec};
pub use train::{evaluate, train, EpochRecord, Example, TrainConfig, TrainReport};

/// Class probabilities for one trace.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivityVector {
    pub scores: Vec<f64>,
    /// Index of the largest score, lowest index on ties.
    pub label: usize,
}

impl ActivityVector {
    pub fn new(scores: Vec<f64>) -> Self {
        let label = argmax(&scores);
        ActivityVector { scores, label }
    }
}

/// Lowest index of the maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
