//! Synthetic labelled traces and train/validation/test splits.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::lane::lane_traces;
use super::PipelineConfig;
use crate::classify::Example;
use crate::doppler::{read_trace_csv, DopplerProcessor, DopplerTrace};
use crate::sanitize::Sanitizer;
use crate::sim::{simulate, Activity, ActivityGenerator};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledTrace {
    pub trace: DopplerTrace,
    pub label: usize,
}

impl LabeledTrace {
    pub fn example(&self) -> Example {
        Example {
            input: self.trace.unit_scaled().into_iter().map(|v| v as f32).collect(),
            label: self.label,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    /// Independent scenarios per activity.
    pub per_class: usize,
    /// Antennas simulated per scenario; every antenna contributes a trace.
    pub n_antennas: usize,
    pub hardware_offsets: bool,
    pub seed: u64,
}

/// One trace per antenna per scenario, from exactly `N_w + N − 1` packets.
pub fn generate_dataset(cfg: &PipelineConfig, spec: &DatasetSpec) -> Result<Vec<LabeledTrace>> {
    let ofdm = cfg.ofdm();
    let sanitizer = Sanitizer::new(&ofdm, cfg.sanitizer())?;
    let processor = DopplerProcessor::new(cfg.doppler())?;
    let n_packets = ((cfg.trace_len - 1) * cfg.window_stride + cfg.window_len) as u64;
    // Traces start at a random point of the velocity schedule so the
    // classifier does not learn where segment boundaries fall.
    let segment = cfg.window_len as u64;
    let mut generator = ActivityGenerator::new(ofdm, n_packets + segment - 1, segment);
    generator.n_antennas = spec.n_antennas;
    generator.hardware_offsets = spec.hardware_offsets;

    let jobs: Vec<(Activity, u64)> = (0..spec.per_class)
        .flat_map(|i| Activity::ALL.into_iter().map(move |a| (a, i as u64)))
        .map(|(a, i)| {
            (
                a,
                spec.seed ^ (i << 8 | a.index() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            )
        })
        .collect();
    let workers = match cfg.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    };
    let chunk = jobs.len().div_ceil(workers.max(1)).max(1);
    let parts: Vec<Result<Vec<LabeledTrace>>> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .chunks(chunk)
            .map(|part| {
                let (sanitizer, processor, generator) = (&sanitizer, &processor, &generator);
                s.spawn(move || {
                    let mut out = Vec::new();
                    for &(activity, seed) in part {
                        let scenario = generator.scenario(activity, seed);
                        let skip = seed % segment;
                        let packets: Vec<_> = simulate(&scenario)?
                            .filter(|p| (skip..skip + n_packets).contains(&p.packet_index))
                            .collect();
                        for a in 0..scenario.n_antennas {
                            let lane = packets
                                .iter()
                                .filter(|p| p.antenna_index as usize == a)
                                .cloned()
                                .map(Ok);
                            for trace in lane_traces(sanitizer, processor.clone(), lane)? {
                                out.push(LabeledTrace {
                                    trace,
                                    label: activity.index(),
                                });
                            }
                        }
                    }
                    Ok(out)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut all = Vec::new();
    for p in parts {
        all.extend(p?);
    }
    Ok(all)
}

/// Stratified split with the given train and validation fractions; the rest
/// is the test set.
pub fn split<T: Clone>(
    items: &[T],
    label: impl Fn(&T) -> usize,
    train: f64,
    val: f64,
    seed: u64,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_classes = items.iter().map(&label).max().map_or(0, |m| m + 1);
    let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
    for class in 0..n_classes {
        let mut members: Vec<&T> = items.iter().filter(|x| label(x) == class).collect();
        members.shuffle(&mut rng);
        let n = members.len();
        let n_train = (n as f64 * train).round() as usize;
        let n_val = ((n as f64 * val).round() as usize).min(n - n_train);
        for (i, m) in members.into_iter().enumerate() {
            let dest = if i < n_train {
                &mut a
            } else if i < n_train + n_val {
                &mut b
            } else {
                &mut c
            };
            dest.push(m.clone());
        }
    }
    (a, b, c)
}

/// Reads `<dir>/<class name>/*.csv` traces; classes are the sorted
/// sub-directory names.
pub fn load_trace_dir(dir: &Path) -> Result<(Vec<String>, Vec<LabeledTrace>)> {
    let mut classes: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    classes.sort();
    if classes.is_empty() {
        return Err(Error::Format(format!("{} has no class directories", dir.display())));
    }
    let mut out = Vec::new();
    for (label, class) in classes.iter().enumerate() {
        let mut files: Vec<_> = std::fs::read_dir(dir.join(class))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        for f in files {
            let file = std::fs::File::open(&f)?;
            let trace = read_trace_csv(std::io::BufReader::new(file))
                .map_err(|e| Error::Format(format!("{}: {e}", f.display())))?;
            out.push(LabeledTrace { trace, label });
        }
    }
    Ok((classes, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_stratified() {
        let items: Vec<usize> = (0..50).map(|i| i % 5).collect();
        let (a, b, c) = split(&items, |x| *x, 0.6, 0.2, 1);
        assert_eq!((a.len(), b.len(), c.len()), (30, 10, 10));
        for class in 0..5 {
            assert_eq!(a.iter().filter(|&&x| x == class).count(), 6);
            assert_eq!(c.iter().filter(|&&x| x == class).count(), 2);
        }
    }

    #[test]
    fn small_dataset_has_expected_shapes() {
        let cfg = PipelineConfig {
            trace_len: 4,
            threads: 1,
            ..PipelineConfig::default()
        };
        let spec = DatasetSpec {
            per_class: 1,
            n_antennas: 1,
            hardware_offsets: true,
            seed: 3,
        };
        let data = generate_dataset(&cfg, &spec).unwrap();
        assert_eq!(data.len(), 5);
        for (i, d) in data.iter().enumerate() {
            assert_eq!(d.label, i);
            assert_eq!((d.trace.rows, d.trace.cols), (4, 100));
        }
    }
}
