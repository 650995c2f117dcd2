//! Centre-distance mAP in the nuScenes style and run aggregation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::geometry::BoundingBox;
use crate::scene::GtMode;

/// Centre-distance match thresholds, metres.
pub const THRESHOLDS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
/// Threshold at which tp/fp/fn counts are reported.
pub const COUNT_THRESHOLD: f64 = 2.0;
const RECALL_SAMPLES: usize = 101;
const MIN_RECALL: f64 = 0.1;
const MIN_PRECISION: f64 = 0.1;
const RECALL_EPS: f64 = 1e-12;

fn bev_distance(a: &BoundingBox, b: &BoundingBox) -> f64 {
    (a.center.x - b.center.x).hypot(a.center.y - b.center.y)
}

/// Detection indices in processing order: descending score, ties by index.
fn score_rank(dets: &[BoundingBox]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|a, b| dets[*b].score.total_cmp(&dets[*a].score).then(a.cmp(b)));
    order
}

/// Greedy matching. Returns `(detection index, matched gt index)` pairs in
/// processing order.
pub fn match_detections(dets: &[BoundingBox], gts: &[BoundingBox], threshold: f64) -> Vec<(usize, Option<usize>)> {
    let mut taken = vec![false; gts.len()];
    score_rank(dets)
        .into_iter()
        .map(|d| {
            let best = gts
                .iter()
                .enumerate()
                .filter(|(g, _)| !taken[*g])
                .map(|(g, gt)| (g, bev_distance(&dets[d], gt)))
                .filter(|(_, dist)| *dist <= threshold)
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            if let Some((g, _)) = best {
                taken[g] = true;
            }
            (d, best.map(|(g, _)| g))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// `(recall, interpolated precision)` at recall 0.00, 0.01, .., 1.00.
    pub samples: Vec<(f64, f64)>,
}

impl PrCurve {
    /// Builds the interpolated curve from scored match outcomes pooled over
    /// any number of frames. Operating points sit at every distinct score
    /// cutoff, so tied detections enter together.
    pub fn from_matches(scored: &[(f64, bool)], gt_count: usize) -> PrCurve {
        let mut sorted = scored.to_vec();
        sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut points = Vec::new();
        let (mut tp, mut fp) = (0usize, 0usize);
        for (i, (score, hit)) in sorted.iter().enumerate() {
            if *hit {
                tp += 1;
            } else {
                fp += 1;
            }
            let last_of_tie = sorted.get(i + 1).is_none_or(|next| next.0 != *score);
            if last_of_tie && gt_count > 0 {
                points.push((tp as f64 / gt_count as f64, tp as f64 / (tp + fp) as f64));
            }
        }
        let samples = (0..RECALL_SAMPLES)
            .map(|j| {
                let r = j as f64 / (RECALL_SAMPLES - 1) as f64;
                let p = points
                    .iter()
                    .filter(|(recall, _)| *recall + RECALL_EPS >= r)
                    .map(|(_, precision)| *precision)
                    .fold(0.0, f64::max);
                (r, p)
            })
            .collect();
        PrCurve { samples }
    }

    /// Area above the 0.1 precision floor over recall above 0.1, scaled so
    /// a perfect curve scores 1.
    pub fn average_precision(&self) -> f64 {
        let step = 1.0 / (RECALL_SAMPLES - 1) as f64;
        let norm = (1.0 - MIN_RECALL) * (1.0 - MIN_PRECISION);
        let area: f64 = self
            .samples
            .iter()
            .filter(|(r, _)| *r > MIN_RECALL + RECALL_EPS)
            .map(|(_, p)| (p - MIN_PRECISION).max(0.0) * step)
            .sum();
        (area / norm).clamp(0.0, 1.0)
    }
}

/// A frame's detections and ground truth in a common frame.
#[derive(Debug, Clone, Copy)]
pub struct FrameBoxes<'a> {
    pub dets: &'a [BoundingBox],
    pub gts: &'a [BoundingBox],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Counts {
    tp: usize,
    fp: usize,
    gts: usize,
}

fn scored_matches(frames: &[FrameBoxes], threshold: f64) -> (Vec<(f64, bool)>, Counts) {
    let mut scored = Vec::new();
    let mut counts = Counts { tp: 0, fp: 0, gts: 0 };
    for f in frames {
        counts.gts += f.gts.len();
        for (d, m) in match_detections(f.dets, f.gts, threshold) {
            scored.push((f.dets[d].score, m.is_some()));
            if m.is_some() {
                counts.tp += 1;
            } else {
                counts.fp += 1;
            }
        }
    }
    (scored, counts)
}

/// AP over frames matched independently and pooled into one PR curve.
pub fn average_precision_frames(frames: &[FrameBoxes], threshold: f64) -> f64 {
    let (scored, counts) = scored_matches(frames, threshold);
    if counts.gts == 0 {
        return if scored.is_empty() { 1.0 } else { 0.0 };
    }
    PrCurve::from_matches(&scored, counts.gts).average_precision()
}

pub fn average_precision(dets: &[BoundingBox], gts: &[BoundingBox], threshold: f64) -> f64 {
    average_precision_frames(&[FrameBoxes { dets, gts }], threshold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// AP at each of [`THRESHOLDS`].
    pub per_threshold_ap: [f64; 4],
    pub map_score: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub gt_mode: GtMode,
    pub bytes_per_frame: f64,
}

fn class_ids(frames: &[FrameBoxes]) -> BTreeSet<u8> {
    frames
        .iter()
        .flat_map(|f| f.gts.iter().chain(f.dets))
        .map(|b| b.class_id)
        .collect()
}

fn per_class<'a>(frames: &[FrameBoxes<'a>], class: u8) -> Vec<(Vec<BoundingBox>, Vec<BoundingBox>)> {
    frames
        .iter()
        .map(|f| {
            let pick = |v: &[BoundingBox]| v.iter().filter(|b| b.class_id == class).copied().collect();
            (pick(f.dets), pick(f.gts))
        })
        .collect()
}

/// mAP over a run of frames. With a single class present, matching ignores
/// class; with several, AP is computed per class and averaged.
pub fn mean_ap_frames(frames: &[FrameBoxes], gt_mode: GtMode, bytes_per_frame: f64) -> EvalResult {
    let classes = class_ids(frames);
    let per_threshold_ap = THRESHOLDS.map(|thr| {
        if classes.len() <= 1 {
            average_precision_frames(frames, thr)
        } else {
            let total: f64 = classes
                .iter()
                .map(|c| {
                    let split = per_class(frames, *c);
                    let views: Vec<FrameBoxes> = split.iter().map(|(d, g)| FrameBoxes { dets: d, gts: g }).collect();
                    average_precision_frames(&views, thr)
                })
                .sum();
            total / classes.len() as f64
        }
    });
    let (_, counts) = scored_matches(frames, COUNT_THRESHOLD);
    EvalResult {
        per_threshold_ap,
        map_score: per_threshold_ap.iter().sum::<f64>() / THRESHOLDS.len() as f64,
        tp: counts.tp,
        fp: counts.fp,
        fn_: counts.gts - counts.tp,
        gt_mode,
        bytes_per_frame,
    }
}

pub fn mean_ap(dets: &[BoundingBox], gts: &[BoundingBox], gt_mode: GtMode) -> EvalResult {
    mean_ap_frames(&[FrameBoxes { dets, gts }], gt_mode, 0.0)
}

/// One evaluated (strategy, seed, gt mode) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub strategy: String,
    pub seed: u64,
    pub result: EvalResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub strategy: String,
    pub gt_mode: GtMode,
    pub runs: usize,
    pub map_mean: f64,
    /// Population standard deviation over runs.
    pub map_std: f64,
    pub ap_mean: [f64; 4],
    pub bytes_mean: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Mean and spread per (strategy, gt mode), rows in order of first
/// appearance.
pub fn aggregate_runs(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, GtMode)> = Vec::new();
    for r in records {
        let key = (r.strategy.clone(), r.result.gt_mode);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(strategy, gt_mode)| {
            let group: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.strategy == strategy && r.result.gt_mode == gt_mode)
                .collect();
            let maps: Vec<f64> = group.iter().map(|r| r.result.map_score).collect();
            let ap_mean =
                std::array::from_fn(|i| mean(&group.iter().map(|r| r.result.per_threshold_ap[i]).collect::<Vec<_>>()));
            let bytes: Vec<f64> = group.iter().map(|r| r.result.bytes_per_frame).collect();
            SummaryRow {
                strategy,
                gt_mode,
                runs: group.len(),
                map_mean: mean(&maps),
                map_std: population_std(&maps),
                ap_mean,
                bytes_mean: mean(&bytes),
            }
        })
        .collect()
}
