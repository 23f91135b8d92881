//! Ranking metrics: AUC (Mann–Whitney with midranks), step-function
//! average precision, interpolated equal error rate, and frame-to-video
//! aggregation. All sorts break ties by sample id so reports are
//! reproducible.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("need both classes present (got {pos} positives, {neg} negatives)")]
    SingleClass { pos: usize, neg: usize },
    #[error("video {0} mixes labels across frames")]
    MixedLabels(String),
    #[error("score {0} is not finite")]
    BadScore(f64),
}

/// One scored frame (or video).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSample {
    pub id: String,
    pub score: f64,
    /// 0 = real, 1 = fake.
    pub label: u8,
    pub video_id: String,
}

/// Evaluation summary for one run.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub frame_auc: f64,
    pub video_auc: f64,
    pub ap: f64,
    pub eer: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    /// (fpr, tpr, threshold) vertices of the frame-level ROC.
    pub roc: Vec<(f64, f64, f64)>,
}

fn class_counts(samples: &[ScoredSample]) -> Result<(usize, usize), MetricsError> {
    if let Some(s) = samples.iter().find(|s| !s.score.is_finite()) {
        return Err(MetricsError::BadScore(s.score));
    }
    let pos = samples.iter().filter(|s| s.label == 1).count();
    let neg = samples.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricsError::SingleClass { pos, neg });
    }
    Ok((pos, neg))
}

/// Rank-based AUC with midrank tie handling:
/// `(R_pos − n_pos(n_pos+1)/2) / (n_pos·n_neg)`.
pub fn auc(samples: &[ScoredSample]) -> Result<f64, MetricsError> {
    let (n_pos, n_neg) = class_counts(samples)?;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| {
        samples[a]
            .score
            .partial_cmp(&samples[b].score)
            .unwrap()
            .then_with(|| samples[a].id.cmp(&samples[b].id))
    });
    // Midranks over tied score groups.
    let mut ranks = vec![0.0f64; samples.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && samples[order[j]].score == samples[order[i]].score {
            j += 1;
        }
        let mid = (i + 1 + j) as f64 / 2.0; // average of ranks i+1..=j
        for &idx in &order[i..j] {
            ranks[idx] = mid;
        }
        i = j;
    }
    let r_pos: f64 = samples
        .iter()
        .zip(&ranks)
        .filter(|(s, _)| s.label == 1)
        .map(|(_, &r)| r)
        .sum();
    Ok((r_pos - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos * n_neg) as f64)
}

/// Step-function AP: descending score order (ties by id), sum of
/// precision at positions where recall increases.
pub fn average_precision(samples: &[ScoredSample]) -> Result<f64, MetricsError> {
    let n_pos = samples.iter().filter(|s| s.label == 1).count();
    if n_pos == 0 {
        return Err(MetricsError::SingleClass { pos: 0, neg: samples.len() });
    }
    if let Some(s) = samples.iter().find(|s| !s.score.is_finite()) {
        return Err(MetricsError::BadScore(s.score));
    }
    let mut sorted: Vec<&ScoredSample> = samples.iter().collect();
    sorted.sort_by(|a, b| {
        b.score.partial_cmp(&a.score).unwrap().then_with(|| a.id.cmp(&b.id))
    });
    let mut hits = 0usize;
    let mut ap = 0.0;
    for (k, s) in sorted.iter().enumerate() {
        if s.label == 1 {
            hits += 1;
            // Recall step is 1/n_pos at each positive; precision at k+1.
            ap += hits as f64 / (k + 1) as f64 / n_pos as f64;
        }
    }
    Ok(ap)
}

/// ROC vertices from (0,0) to (1,1), one step per distinct descending
/// threshold. The threshold column holds the score at which the point is
/// reached (+inf at the origin).
pub fn roc_curve(samples: &[ScoredSample]) -> Result<Vec<(f64, f64, f64)>, MetricsError> {
    let (n_pos, n_neg) = class_counts(samples)?;
    let mut sorted: Vec<&ScoredSample> = samples.iter().collect();
    sorted.sort_by(|a, b| {
        b.score.partial_cmp(&a.score).unwrap().then_with(|| a.id.cmp(&b.id))
    });
    let mut curve = vec![(0.0, 0.0, f64::INFINITY)];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < sorted.len() {
        let thr = sorted[i].score;
        while i < sorted.len() && sorted[i].score == thr {
            if sorted[i].label == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        curve.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64, thr));
    }
    Ok(curve)
}

/// Equal error rate: FPR at the ROC point where FPR = 1 − TPR, linearly
/// interpolated between adjacent vertices when no vertex is exact.
pub fn eer(samples: &[ScoredSample]) -> Result<f64, MetricsError> {
    let curve = roc_curve(samples)?;
    // d = fpr − (1 − tpr) goes from −1 at (0,0) to +1 at (1,1).
    let mut prev = curve[0];
    for &pt in &curve[1..] {
        let d_prev = prev.0 - (1.0 - prev.1);
        let d_cur = pt.0 - (1.0 - pt.1);
        if d_cur >= 0.0 {
            if d_cur == 0.0 || d_cur == d_prev {
                return Ok(pt.0);
            }
            // Interpolate the zero crossing of d along the segment.
            let lambda = -d_prev / (d_cur - d_prev);
            return Ok(prev.0 + lambda * (pt.0 - prev.0));
        }
        prev = pt;
    }
    Ok(1.0)
}

/// Aggregates frame samples into one sample per video (mean score);
/// rejects videos whose frames disagree on the label.
pub fn video_level(samples: &[ScoredSample]) -> Result<Vec<ScoredSample>, MetricsError> {
    let mut groups: BTreeMap<&str, Vec<&ScoredSample>> = BTreeMap::new();
    for s in samples {
        groups.entry(&s.video_id).or_default().push(s);
    }
    let mut out = Vec::with_capacity(groups.len());
    for (vid, frames) in groups {
        let label = frames[0].label;
        if frames.iter().any(|f| f.label != label) {
            return Err(MetricsError::MixedLabels(vid.to_string()));
        }
        let score = frames.iter().map(|f| f.score).sum::<f64>() / frames.len() as f64;
        out.push(ScoredSample {
            id: vid.to_string(),
            score,
            label,
            video_id: vid.to_string(),
        });
    }
    Ok(out)
}

/// Full report over frame samples.
pub fn report(samples: &[ScoredSample]) -> Result<MetricReport, MetricsError> {
    let (n_pos, n_neg) = class_counts(samples)?;
    let videos = video_level(samples)?;
    Ok(MetricReport {
        frame_auc: auc(samples)?,
        video_auc: auc(&videos)?,
        ap: average_precision(samples)?,
        eer: eer(samples)?,
        n_pos,
        n_neg,
        roc: roc_curve(samples)?,
    })
}

#[cfg(test)]
pub(crate) mod oracle {
    use super::ScoredSample;

    /// O(n_pos·n_neg) pairwise AUC, ties worth one half.
    pub fn auc_pairwise(samples: &[ScoredSample]) -> f64 {
        let pos: Vec<f64> =
            samples.iter().filter(|s| s.label == 1).map(|s| s.score).collect();
        let neg: Vec<f64> =
            samples.iter().filter(|s| s.label == 0).map(|s| s.score).collect();
        let mut wins = 0.0;
        for &p in &pos {
            for &n in &neg {
                if p > n {
                    wins += 1.0;
                } else if p == n {
                    wins += 0.5;
                }
            }
        }
        wins / (pos.len() * neg.len()) as f64
    }

    pub fn make(scores_labels: &[(f64, u8)]) -> Vec<ScoredSample> {
        scores_labels
            .iter()
            .enumerate()
            .map(|(i, &(score, label))| ScoredSample {
                id: format!("s{i:04}"),
                score,
                label,
                video_id: format!("v{i:04}"),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::oracle::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn auc_perfect_and_tied() {
        let perfect = make(&[(0.9, 1), (0.8, 1), (0.2, 0), (0.1, 0)]);
        assert_eq!(auc(&perfect).unwrap(), 1.0);
        let tied = make(&[(0.5, 1), (0.5, 1), (0.5, 0), (0.5, 0)]);
        assert_eq!(auc(&tied).unwrap(), 0.5);
    }

    #[test]
    fn auc_worked_example() {
        // pos {0.9, 0.4}, neg {0.5, 0.1}: 3 wins, 1 loss of 4 pairs.
        let samples = make(&[(0.9, 1), (0.4, 1), (0.5, 0), (0.1, 0)]);
        assert_eq!(auc(&samples).unwrap(), 0.75);
        assert_eq!(auc_pairwise(&samples), 0.75);
    }

    #[test]
    fn auc_rejects_single_class() {
        let samples = make(&[(0.9, 1), (0.4, 1)]);
        assert!(matches!(auc(&samples), Err(MetricsError::SingleClass { .. })));
    }

    #[test]
    fn ap_cases() {
        let perfect = make(&[(0.9, 1), (0.8, 1), (0.2, 0), (0.1, 0)]);
        assert_eq!(average_precision(&perfect).unwrap(), 1.0);
        // Single positive ranked 2nd of 3.
        let mid = make(&[(0.9, 0), (0.5, 1), (0.1, 0)]);
        assert_eq!(average_precision(&mid).unwrap(), 0.5);
        assert!(average_precision(&make(&[(0.3, 0)])).is_err());
    }

    #[test]
    fn ap_matches_brute_force_oracle() {
        // Definition-level route: for each positive, precision over the
        // samples ranked at or above it (same deterministic ordering).
        for seed in 0..30u64 {
            let mut rng = crate::rng::Xoshiro256PlusPlus::new(seed);
            let n = 3 + (rng.next_below(20) as usize);
            let data: Vec<(f64, u8)> = (0..n)
                .map(|_| {
                    // Coarse scores so ties actually occur.
                    let s = (rng.next_below(8) as f64) / 8.0;
                    (s, (rng.next_f64() < 0.5) as u8)
                })
                .collect();
            let samples = make(&data);
            if samples.iter().all(|s| s.label == 0) {
                continue;
            }
            let mut sorted: Vec<&ScoredSample> = samples.iter().collect();
            sorted.sort_by(|a, b| {
                b.score.partial_cmp(&a.score).unwrap().then_with(|| a.id.cmp(&b.id))
            });
            let n_pos = sorted.iter().filter(|s| s.label == 1).count() as f64;
            let mut expect = 0.0;
            for (k, s) in sorted.iter().enumerate() {
                if s.label == 1 {
                    let hits =
                        sorted[..=k].iter().filter(|t| t.label == 1).count() as f64;
                    expect += (hits / (k + 1) as f64) / n_pos;
                }
            }
            assert!((average_precision(&samples).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn eer_extremes() {
        let perfect = make(&[(0.9, 1), (0.8, 1), (0.2, 0), (0.1, 0)]);
        assert_eq!(eer(&perfect).unwrap(), 0.0);
        let inverted = make(&[(0.1, 1), (0.2, 1), (0.8, 0), (0.9, 0)]);
        assert_eq!(eer(&inverted).unwrap(), 1.0);
    }

    #[test]
    fn eer_interpolated_example() {
        // pos {0.8, 0.6}, neg {0.7, 0.2}. ROC vertices:
        // (0,0) -> (0,0.5) @0.8 -> (0.5,0.5) @0.7 -> (0.5,1) @0.6 -> (1,1) @0.2
        // d = fpr-(1-tpr): -1, -0.5, 0, ... exact vertex at (0.5, 0.5).
        let samples = make(&[(0.8, 1), (0.6, 1), (0.7, 0), (0.2, 0)]);
        assert_eq!(eer(&samples).unwrap(), 0.5);
        // A genuinely interpolated case: pos {0.9,0.7,0.6}, neg {0.8,0.5}.
        // Vertices: (0,1/3)@.9 (1/2,1/3)@.8 (1/2,2/3)@.7 (1/2,1)@.6 (1,1)@.5
        // d: -2/3, -1/6, +1/6 -> crossing between (.5,1/3) and (.5,2/3),
        // fpr constant 0.5 there.
        let s2 = make(&[(0.9, 1), (0.7, 1), (0.6, 1), (0.8, 0), (0.5, 0)]);
        assert!((eer(&s2).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn video_aggregation() {
        let mut samples = make(&[(0.2, 1), (0.4, 1), (0.9, 0)]);
        samples[0].video_id = "va".into();
        samples[1].video_id = "va".into();
        samples[2].video_id = "vb".into();
        let videos = video_level(&samples).unwrap();
        assert_eq!(videos.len(), 2);
        let va = videos.iter().find(|v| v.video_id == "va").unwrap();
        assert!((va.score - 0.3).abs() < 1e-15);
        assert_eq!(va.label, 1);
        // Mixed labels rejected.
        samples[1].label = 0;
        assert!(matches!(video_level(&samples), Err(MetricsError::MixedLabels(_))));
    }

    #[test]
    fn single_frame_videos_match_frame_metrics() {
        let samples = make(&[(0.9, 1), (0.4, 1), (0.5, 0), (0.1, 0)]);
        let videos = video_level(&samples).unwrap();
        assert_eq!(auc(&videos).unwrap(), auc(&samples).unwrap());
    }

    #[test]
    fn hand_computed_video_means() {
        let rows = [
            ("a", 0.1, 1),
            ("a", 0.5, 1),
            ("b", 0.8, 0),
            ("b", 0.6, 0),
            ("c", 0.9, 1),
        ];
        let samples: Vec<ScoredSample> = rows
            .iter()
            .enumerate()
            .map(|(i, &(vid, score, label))| ScoredSample {
                id: format!("f{i}"),
                score,
                label,
                video_id: vid.to_string(),
            })
            .collect();
        let videos = video_level(&samples).unwrap();
        let get = |vid: &str| videos.iter().find(|v| v.video_id == vid).unwrap().score;
        assert!((get("a") - 0.3).abs() < 1e-15);
        assert!((get("b") - 0.7).abs() < 1e-15);
        assert!((get("c") - 0.9).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise_oracle(seed in any::<u64>()) {
            let mut rng = crate::rng::Xoshiro256PlusPlus::new(seed);
            let n = 4 + (rng.next_below(46) as usize);
            let data: Vec<(f64, u8)> = (0..n)
                .map(|_| ((rng.next_below(16) as f64) / 16.0, (rng.next_f64() < 0.5) as u8))
                .collect();
            let samples = make(&data);
            if class_counts(&samples).is_err() {
                return Ok(());
            }
            prop_assert!((auc(&samples).unwrap() - auc_pairwise(&samples)).abs() < 1e-12);
        }

        #[test]
        fn auc_invariances(seed in any::<u64>()) {
            let mut rng = crate::rng::Xoshiro256PlusPlus::new(seed);
            let data: Vec<(f64, u8)> = (0..20)
                .map(|_| (rng.next_f64(), (rng.next_f64() < 0.5) as u8))
                .collect();
            let samples = make(&data);
            if class_counts(&samples).is_err() {
                return Ok(());
            }
            let base = auc(&samples).unwrap();
            // Strictly increasing transform leaves AUC unchanged.
            let transformed: Vec<ScoredSample> = samples
                .iter()
                .map(|s| ScoredSample { score: (3.0 * s.score).exp() / 30.0, ..s.clone() })
                .collect();
            prop_assert!((auc(&transformed).unwrap() - base).abs() < 1e-12);
            // Label flip mirrors AUC.
            let flipped: Vec<ScoredSample> = samples
                .iter()
                .map(|s| ScoredSample { label: 1 - s.label, ..s.clone() })
                .collect();
            prop_assert!((auc(&flipped).unwrap() - (1.0 - base)).abs() < 1e-12);
            // EER stays in [0,1].
            let e = eer(&samples).unwrap();
            prop_assert!((0.0..=1.0).contains(&e));
        }
    }
}
