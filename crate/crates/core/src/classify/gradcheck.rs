use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{LayerInfo, Network};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub coordinates: usize,
    /// Worst error per layer, in layer order.
    pub per_layer: Vec<(&'static str, f64)>,
}

/// Compares the analytic gradient of the cross-entropy loss with central
/// differences on `per_layer` random coordinates of every layer (dropout
/// off, double precision).
pub fn gradient_check(
    net: &Network<f64>,
    input: &[f64],
    label: usize,
    epsilon: f64,
    per_layer: usize,
    seed: u64,
) -> Result<GradientCheck> {
    gradient_check_with(net, input, label, epsilon, per_layer, seed, |_, _| {})
}

/// As [`gradient_check`], passing the analytic gradient through `corrupt`
/// first (used to confirm the check detects broken gradients).
pub fn gradient_check_with(
    net: &Network<f64>,
    input: &[f64],
    label: usize,
    epsilon: f64,
    per_layer: usize,
    seed: u64,
    corrupt: impl Fn(&mut [f64], &[LayerInfo]),
) -> Result<GradientCheck> {
    if !(1e-6..=1e-3).contains(&epsilon) {
        return Err(Error::invalid("epsilon", "must lie in [1e-6, 1e-3]"));
    }
    if label >= net.spec().n_classes {
        return Err(Error::invalid("label", "out of range"));
    }
    let (_, mut grad) = net.loss_and_gradient(input, label)?;
    corrupt(&mut grad, net.layers());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = net.clone();
    let mut report = GradientCheck {
        max_relative_error: 0.0,
        coordinates: 0,
        per_layer: Vec::new(),
    };
    for layer in net.layers() {
        let range = layer.range();
        let picks = sample(&mut rng, range.len(), per_layer.min(range.len()));
        let mut worst: f64 = 0.0;
        for i in picks.into_iter().map(|j| range.start + j) {
            let original = probe.params[i];
            probe.params[i] = original + epsilon;
            let up = probe.forward(input, None)?.loss(label);
            probe.params[i] = original - epsilon;
            let down = probe.forward(input, None)?.loss(label);
            probe.params[i] = original;
            let numeric = (up - down) / (2.0 * epsilon);
            worst = worst.max(relative_error(grad[i], numeric));
            report.coordinates += 1;
        }
        report.max_relative_error = report.max_relative_error.max(worst);
        report.per_layer.push((layer.name, worst));
    }
    Ok(report)
}

/// `|a − n| / max(|a|, |n|, 1e-7)`; the floor keeps gradients that vanish
/// up to rounding from dominating.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7)
}
