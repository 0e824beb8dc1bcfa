use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{metrics, Metrics};
use super::network::Network;
use crate::{Error, Result};

/// One labelled trace, already scaled to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub input: Vec<f32>,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Epochs without validation-loss improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Worker threads for per-example gradients; 0 picks the core count.
    #[serde(default)]
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            patience: 10,
            seed: 0,
            threads: 0,
        }
    }
}

/// One line of the training log. Epoch 0 is the untrained network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    /// `None` when training without a validation set.
    pub val_loss: Option<f64>,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl TrainReport {
    pub fn initial_loss(&self) -> f64 {
        self.history[0].loss
    }

    pub fn final_loss(&self) -> f64 {
        self.history[self.best_epoch].loss
    }
}

struct Adam {
    m: Vec<f32>,
    v: Vec<f32>,
    step: i32,
    lr: f32,
}

impl Adam {
    const B1: f32 = 0.9;
    const B2: f32 = 0.999;
    const EPS: f32 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            lr: lr as f32,
        }
    }

    fn update(&mut self, params: &mut [f32], grad: &[f32]) {
        self.step += 1;
        let c1 = 1.0 - Self::B1.powi(self.step);
        let c2 = 1.0 - Self::B2.powi(self.step);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * g;
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + Self::EPS);
        }
    }
}

fn worker_count(requested: usize) -> usize {
    match requested {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
}

/// Mini-batch Adam on the mean cross-entropy, with early stopping on the
/// validation loss (training loss when `val` is empty). The best parameters
/// are restored before returning. Each log record is written as a JSON line.
pub fn train(
    net: &mut Network<f32>,
    train_set: &[Example],
    val: &[Example],
    cfg: &TrainConfig,
    mut log: Option<&mut dyn Write>,
) -> Result<TrainReport> {
    let n_classes = net.spec().n_classes;
    let mut seen = vec![false; n_classes];
    for ex in train_set.iter().chain(val) {
        if ex.label >= n_classes {
            return Err(Error::invalid("label", format!("{} ≥ {n_classes} classes", ex.label)));
        }
    }
    for ex in train_set {
        seen[ex.label] = true;
    }
    let missing: Vec<usize> = (0..n_classes).filter(|&c| !seen[c]).collect();
    if !missing.is_empty() {
        return Err(Error::MissingClasses(missing));
    }
    if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::invalid(
            "train config",
            "batch size and learning rate must be positive",
        ));
    }

    let threads = worker_count(cfg.threads);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(net.parameter_count(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let monitor = |r: &EpochRecord| r.val_loss.unwrap_or(r.loss);

    let mut history = vec![epoch_record(net, 0, train_set, val, threads)?];
    emit(&mut log, &history[0])?;
    let mut best = (monitor(&history[0]), 0usize, net.params.clone());

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let grad = batch_gradient(net, train_set, batch, cfg.seed, epoch, b, threads)?;
            adam.update(&mut net.params, &grad);
        }
        let record = epoch_record(net, epoch, train_set, val, threads)?;
        emit(&mut log, &record)?;
        if !record.loss.is_finite() {
            return Err(Error::NonConvergence {
                iterations: epoch,
                objective: record.loss,
                residual: f64::NAN,
            });
        }
        let score = monitor(&record);
        history.push(record);
        if score < best.0 {
            best = (score, epoch, net.params.clone());
        } else if epoch - best.1 >= cfg.patience {
            log::info!("early stop at epoch {epoch}; best epoch {}", best.1);
            break;
        }
    }
    net.params = best.2;
    Ok(TrainReport {
        history,
        best_epoch: best.1,
    })
}

fn emit(log: &mut Option<&mut dyn Write>, record: &EpochRecord) -> Result<()> {
    if let Some(out) = log.as_deref_mut() {
        let line = serde_json::to_string(record).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(out, "{line}")?;
        out.flush()?;
    }
    Ok(())
}

/// Mean gradient over `batch`, with per-example dropout seeded from
/// `(seed, epoch, batch, example)` so results do not depend on threading.
fn batch_gradient(
    net: &Network<f32>,
    data: &[Example],
    batch: &[usize],
    seed: u64,
    epoch: usize,
    b: usize,
    threads: usize,
) -> Result<Vec<f32>> {
    let scale = 1.0 / batch.len() as f32;
    let per_worker = batch.len().div_ceil(threads.max(1));
    let parts: Vec<Result<Vec<f32>>> = std::thread::scope(|s| {
        let handles: Vec<_> = batch
            .chunks(per_worker)
            .map(|chunk| {
                s.spawn(move || {
                    let mut grad = vec![0.0f32; net.parameter_count()];
                    for &i in chunk {
                        let stream = ((epoch as u64) << 40) ^ ((b as u64) << 20) ^ i as u64;
                        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ stream);
                        let fwd = net.forward_train(&data[i].input, &mut rng)?;
                        net.backward(&fwd, data[i].label, scale, &mut grad);
                    }
                    Ok(grad)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut total = vec![0.0f32; net.parameter_count()];
    for part in parts {
        for (t, g) in total.iter_mut().zip(part?) {
            *t += g;
        }
    }
    Ok(total)
}

fn evaluate_loss(net: &Network<f32>, data: &[Example], threads: usize) -> Result<(f64, usize)> {
    if data.is_empty() {
        return Ok((f64::NAN, 0));
    }
    let per_worker = data.len().div_ceil(threads.max(1));
    let parts: Vec<Result<(f64, usize)>> = std::thread::scope(|s| {
        let handles: Vec<_> = data
            .chunks(per_worker)
            .map(|chunk| {
                s.spawn(move || {
                    let mut loss = 0.0;
                    let mut correct = 0;
                    for ex in chunk {
                        let fwd = net.forward(&ex.input, None)?;
                        loss += fwd.loss(ex.label) as f64;
                        correct += (fwd.activity().label == ex.label) as usize;
                    }
                    Ok((loss, correct))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut loss = 0.0;
    let mut correct = 0;
    for part in parts {
        let (l, c) = part?;
        loss += l;
        correct += c;
    }
    Ok((loss / data.len() as f64, correct))
}

fn epoch_record(
    net: &Network<f32>,
    epoch: usize,
    train_set: &[Example],
    val: &[Example],
    threads: usize,
) -> Result<EpochRecord> {
    let (loss, train_correct) = evaluate_loss(net, train_set, threads)?;
    let (val_loss, val_correct) = evaluate_loss(net, val, threads)?;
    let val_loss = (!val.is_empty()).then_some(val_loss);
    let accuracy = if val.is_empty() {
        train_correct as f64 / train_set.len().max(1) as f64
    } else {
        val_correct as f64 / val.len() as f64
    };
    Ok(EpochRecord {
        epoch,
        loss,
        val_loss,
        accuracy,
    })
}

/// Inference-mode metrics over a labelled set.
pub fn evaluate(net: &Network<f32>, data: &[Example]) -> Result<Metrics> {
    let mut pairs = Vec::with_capacity(data.len());
    for ex in data {
        pairs.push((ex.label, net.predict(&ex.input)?.label));
    }
    Ok(metrics(&pairs, net.spec().n_classes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::NetworkSpec;

    /// A bright vertical stripe at a class-specific column.
    fn stripe(spec: &NetworkSpec, class: usize, shift: usize) -> Example {
        let mut input = vec![0.05f32; spec.input_rows * spec.input_cols];
        let col = 2 + class * 4 + shift % 2;
        for r in 0..spec.input_rows {
            input[r * spec.input_cols + col] = 1.0;
        }
        Example { input, label: class }
    }

    #[test]
    fn overfits_one_example_per_class() {
        let spec = NetworkSpec::new(16, 24, 5);
        let mut net = Network::new(spec.clone(), 1).unwrap();
        let data: Vec<_> = (0..5).map(|c| stripe(&spec, c, 0)).collect();
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 5,
            learning_rate: 1e-2,
            patience: 200,
            threads: 1,
            ..TrainConfig::default()
        };
        let mut log = Vec::new();
        let report = train(&mut net, &data, &[], &cfg, Some(&mut log)).unwrap();
        assert!((report.initial_loss() - 5f64.ln()).abs() < 0.1);
        assert!(report.final_loss() < report.initial_loss());
        assert_eq!(evaluate(&net, &data).unwrap().accuracy, 1.0);
        let lines = String::from_utf8(log).unwrap();
        let first: EpochRecord = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
        assert_eq!(first.epoch, 0);
    }

    #[test]
    fn missing_classes_are_listed() {
        let spec = NetworkSpec::new(8, 24, 5);
        let mut net = Network::new(spec.clone(), 1).unwrap();
        let data = vec![stripe(&spec, 0, 0), stripe(&spec, 3, 0)];
        let err = train(&mut net, &data, &[], &TrainConfig::default(), None).unwrap_err();
        assert!(matches!(err, Error::MissingClasses(ref m) if *m == vec![1, 2, 4]));
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let spec = NetworkSpec::new(8, 24, 5);
        let data: Vec<_> = (0..10).map(|i| stripe(&spec, i % 5, i)).collect();
        let cfg = |threads| TrainConfig {
            epochs: 2,
            batch_size: 4,
            threads,
            ..TrainConfig::default()
        };
        let mut a = Network::new(spec.clone(), 2).unwrap();
        let mut b = a.clone();
        train(&mut a, &data, &[], &cfg(1), None).unwrap();
        train(&mut b, &data, &[], &cfg(1), None).unwrap();
        assert_eq!(a.params, b.params);
        let mut c = Network::new(spec, 2).unwrap();
        train(&mut c, &data, &[], &cfg(3), None).unwrap();
        let diff = a
            .params
            .iter()
            .zip(&c.params)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f32::max);
        assert!(diff < 1e-4);
    }
}
