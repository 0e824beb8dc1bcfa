use serde::Serialize;

/// Classification metrics over `n_classes` labels.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// Recall of each class (fraction of its examples labelled correctly).
    pub per_class_accuracy: Vec<f64>,
    pub f1: Vec<f64>,
    /// `confusion[true][predicted]`, rows normalized to sum to one (empty
    /// rows stay zero).
    pub confusion: Vec<Vec<f64>>,
    pub counts: Vec<Vec<usize>>,
}

/// `pairs` holds `(true label, predicted label)`.
pub fn metrics(pairs: &[(usize, usize)], n_classes: usize) -> Metrics {
    let mut counts = vec![vec![0usize; n_classes]; n_classes];
    for &(t, p) in pairs {
        counts[t][p] += 1;
    }
    let correct: usize = (0..n_classes).map(|c| counts[c][c]).sum();
    let accuracy = if pairs.is_empty() {
        0.0
    } else {
        correct as f64 / pairs.len() as f64
    };
    let row_total = |c: usize| counts[c].iter().sum::<usize>();
    let col_total = |c: usize| (0..n_classes).map(|t| counts[t][c]).sum::<usize>();
    let per_class_accuracy = (0..n_classes)
        .map(|c| match row_total(c) {
            0 => 0.0,
            n => counts[c][c] as f64 / n as f64,
        })
        .collect();
    let f1 = (0..n_classes)
        .map(|c| {
            let tp = counts[c][c] as f64;
            let denom = (row_total(c) + col_total(c)) as f64;
            if row_total(c) == 0 {
                log::warn!("class {c} has no examples; F1 reported as 0");
                0.0
            } else if denom == 0.0 {
                0.0
            } else {
                2.0 * tp / denom
            }
        })
        .collect();
    let confusion = counts
        .iter()
        .map(|row| {
            let n: usize = row.iter().sum();
            row.iter()
                .map(|&v| if n == 0 { 0.0 } else { v as f64 / n as f64 })
                .collect()
        })
        .collect();
    Metrics {
        accuracy,
        per_class_accuracy,
        f1,
        confusion,
        counts,
    }
}
