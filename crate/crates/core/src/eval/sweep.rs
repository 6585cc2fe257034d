use serde::{Deserialize, Serialize};

use crate::control::Dimension;
use crate::corpus::Window;
use crate::model::{FilmClassifier, TextEncoder};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    /// Mean probabilities over the probe set, in class order.
    pub mean_probs: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub dimension: Dimension,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn column(&self, class: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean_probs[class]).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.value).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{},p_turn_claim,p_backchannel,p_stay_silent\n", self.dimension);
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{}\n", r.value, r.mean_probs[0], r.mean_probs[1], r.mean_probs[2]));
        }
        s
    }
}

/// Move one dial over `i / (steps - 1)` for `i` in `0..steps` while the other
/// dial keeps each probe's own value, and average the class probabilities.
/// `steps == 1` gives a single row at 0.
pub fn dial_sweep<E: TextEncoder>(
    model: &FilmClassifier<E>,
    probes: &[Window],
    dimension: Dimension,
    steps: usize,
) -> Result<SweepTable> {
    if steps == 0 {
        return Err(Error::invalid("steps", "must be at least 1"));
    }
    if probes.is_empty() {
        return Err(Error::invalid("probe set", "empty"));
    }
    let encoded: Vec<(Vec<f64>, [f64; 2])> = probes
        .iter()
        .map(|w| (model.encode(&model.prepare(&w.text)), w.dials()))
        .collect();
    let slot = match dimension {
        Dimension::Bc => 0,
        Dimension::Tc => 1,
    };
    let rows = (0..steps)
        .map(|i| {
            let value = if steps == 1 { 0.0 } else { i as f64 / (steps - 1) as f64 };
            let mut sum = [0.0; 3];
            for (h, c) in &encoded {
                let mut c = *c;
                c[slot] = value;
                let p = model.probs_from_encoded(h, &c);
                for k in 0..3 {
                    sum[k] += p[k];
                }
            }
            SweepRow { value, mean_probs: sum.map(|s| s / encoded.len() as f64) }
        })
        .collect();
    Ok(SweepTable { dimension, rows })
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties; `None` when either
/// side is constant or the lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControlParams;
    use crate::model::{EncoderConfig, ModelConfig};
    use crate::{Label, Subtype};

    fn probes() -> Vec<Window> {
        ["so anyway", "you know what", "yeah", "and then we left"]
            .iter()
            .enumerate()
            .map(|(i, t)| Window {
                text: t.to_string(),
                label: Label::StaySilent,
                subtype: Subtype::None,
                word_count: t.split_whitespace().count(),
                controls: ControlParams::neutral(),
                conversation_id: "c".into(),
                boundary_ms: i as u64,
                perspective: "a".into(),
            })
            .collect()
    }

    fn model() -> FilmClassifier {
        FilmClassifier::new(&ModelConfig {
            encoder: EncoderConfig { buckets: 64, embed_dim: 4, hidden_dim: 6, hash_seed: 1 },
            film_hidden: 3,
            init_seed: 2,
        })
    }

    #[test]
    fn identity_film_gives_flat_sweep() {
        let t = dial_sweep(&model(), &probes(), Dimension::Bc, 11).unwrap();
        assert_eq!(t.rows.len(), 11);
        assert_eq!(t.rows[3].value, 0.3);
        assert!(t.rows.iter().all(|r| r.mean_probs == t.rows[0].mean_probs));
        assert!(spearman(&t.values(), &t.column(1)).is_none());
    }

    #[test]
    fn single_step_is_zero() {
        let t = dial_sweep(&model(), &probes(), Dimension::Tc, 1).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].value, 0.0);
        assert_eq!(t.to_csv().lines().count(), 2);
    }

    #[test]
    fn spearman_known_values() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        // Ties: ranks y = [1.5, 1.5, 3, 4].
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[5.0, 5.0, 6.0, 7.0]).unwrap();
        let expected = 4.5 / (5.0f64 * 4.5).sqrt();
        assert!((r - expected).abs() < 1e-12);
    }
}
