use serde::{Deserialize, Serialize};

use super::ActivityVector;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionRule {
    Agreement,
    Sum,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusionResult {
    pub label: usize,
    pub per_antenna: Vec<ActivityVector>,
    pub rule_used: FusionRule,
}

/// Combines per-antenna decisions. A class predicted by at least `len − 1`
/// antennas wins outright; if no class (or more than one) reaches that
/// count, the label is the argmax of the element-wise score sum.
pub fn fuse(vectors: &[ActivityVector]) -> Result<FusionResult> {
    let first = vectors.first().ok_or(Error::EmptyFusion)?;
    let n_classes = first.scores.len();
    if vectors.iter().any(|v| v.scores.len() != n_classes) {
        return Err(Error::ShapeMismatch {
            expected: format!("{n_classes} scores per antenna"),
            found: "mixed lengths".into(),
        });
    }
    let mut counts = vec![0usize; n_classes];
    for v in vectors {
        counts[v.label] += 1;
    }
    let need = vectors.len().saturating_sub(1).max(1);
    let mut agreeing = (0..n_classes).filter(|&c| counts[c] >= need);
    let (label, rule_used) = match (agreeing.next(), agreeing.next()) {
        (Some(c), None) => (c, FusionRule::Agreement),
        _ => {
            let mut sum = vec![0.0; n_classes];
            for v in vectors {
                for (s, x) in sum.iter_mut().zip(&v.scores) {
                    *s += x;
                }
            }
            (super::argmax(&sum), FusionRule::Sum)
        }
    };
    Ok(FusionResult {
        label,
        per_antenna: vectors.to_vec(),
        rule_used,
    })
}
