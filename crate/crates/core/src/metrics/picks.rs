use serde::{Deserialize, Serialize};

use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pick {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPick {
    pub pick: Pick,
    pub true_positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickMatch {
    /// In descending confidence order.
    pub picks: Vec<LabeledPick>,
    pub false_negatives: usize,
    pub ground_truth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// Thresholds in decreasing order.
    pub points: Vec<PrPoint>,
    pub ground_truth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Auprc {
    pub value: f64,
    /// Set when there are no ground-truth positives and the value is 0 by
    /// definition.
    pub no_positives: bool,
}

fn descending(picks: &[Pick]) -> Vec<Pick> {
    let mut sorted = picks.to_vec();
    sorted.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    sorted
}

/// The `n` most confident picks.
pub fn top_n(picks: &[Pick], n: usize) -> Vec<Pick> {
    let mut sorted = descending(picks);
    sorted.truncate(n);
    sorted
}

/// Greedy matching in descending confidence: each pick claims the nearest
/// unmatched ground-truth center within `d_match`.
pub fn match_picks(picks: &[Pick], gt: &[(f64, f64)], d_match: f64) -> Result<PickMatch, MetricsError> {
    if !(d_match > 0.0) {
        return Err(MetricsError::Invalid(format!("match distance must be positive, got {d_match}")));
    }
    let mut taken = vec![false; gt.len()];
    let labeled = descending(picks)
        .into_iter()
        .map(|p| {
            let best = gt
                .iter()
                .enumerate()
                .filter(|(g, _)| !taken[*g])
                .map(|(g, &(x, y))| (g, (p.x - x).hypot(p.y - y)))
                .filter(|&(_, d)| d <= d_match)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((g, _)) = best {
                taken[g] = true;
            }
            LabeledPick { pick: p, true_positive: best.is_some() }
        })
        .collect();
    let matched = taken.iter().filter(|&&t| t).count();
    Ok(PickMatch { picks: labeled, false_negatives: gt.len() - matched, ground_truth: gt.len() })
}

fn counts_at(picks: &[LabeledPick], tau: f64) -> (usize, usize) {
    picks.iter().filter(|p| p.pick.confidence >= tau).fold((0, 0), |(tp, fp), p| {
        if p.true_positive {
            (tp + 1, fp)
        } else {
            (tp, fp + 1)
        }
    })
}

fn ratio(tp: usize, fp: usize) -> f64 {
    if tp + fp == 0 {
        1.0
    } else {
        tp as f64 / (tp + fp) as f64
    }
}

/// `TP / (TP + FP)` over picks with confidence at least `tau`; 1 when
/// nothing passes.
pub fn precision_at(picks: &[LabeledPick], tau: f64) -> f64 {
    let (tp, fp) = counts_at(picks, tau);
    ratio(tp, fp)
}

/// Precision and recall at thresholds `1 - k / n_levels` for
/// `k = 1..=n_levels`.
pub fn pr_curve(m: &PickMatch, n_levels: usize) -> PrCurve {
    let points = (1..=n_levels)
        .map(|k| {
            let threshold = 1.0 - k as f64 / n_levels as f64;
            let (tp, fp) = counts_at(&m.picks, threshold);
            let recall = if m.ground_truth == 0 { 0.0 } else { tp as f64 / m.ground_truth as f64 };
            PrPoint { threshold, precision: ratio(tp, fp), recall, tp, fp, fn_: m.ground_truth - tp }
        })
        .collect();
    PrCurve { points, ground_truth: m.ground_truth }
}

/// `Σ_k Pr(k) (Re(k) - Re(k-1))` with `Re(0) = 0`.
pub fn auprc(curve: &PrCurve) -> Auprc {
    if curve.ground_truth == 0 {
        return Auprc { value: 0.0, no_positives: true };
    }
    let mut prev = 0.0;
    let mut value = 0.0;
    for p in &curve.points {
        value += p.precision * (p.recall - prev);
        prev = p.recall;
    }
    Auprc { value, no_positives: false }
}
