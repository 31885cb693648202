//! Scoring of predicted label sequences against ground truth.
//!
//! Binary protocols compare one foreground mask per frame (Jaccard `J`,
//! boundary `F`, Mean/Recall/Decay aggregation). Multi-mask protocols match
//! predicted labels to ground-truth labels, either one-to-one over the whole
//! sequence or many-to-one per frame.

mod binary;
mod hungarian;

pub use binary::{boundary, boundary_f, davis_aggregate, default_tolerance, jaccard, MetricReport};
pub use hungarian::assign_min;

use std::collections::BTreeSet;
use std::io::Write;

use thiserror::Error;

use crate::labels::{LabelMap, LabelMaskSequence};
use crate::segmenter::background_label;

/// Largest label count searched exhaustively for the foreground subset.
pub const MAX_SUBSET_LABELS: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
    #[error("nothing to evaluate")]
    Empty,
    #[error("{0} labels exceed the exhaustive-search limit")]
    TooManyLabels(usize),
    #[error("csv output failed: {0}")]
    Csv(String),
}

/// Frames where both sequences are present, after checking shapes.
fn paired<'a>(
    pred: &'a LabelMaskSequence,
    gt: &'a LabelMaskSequence,
) -> Result<Vec<(&'a LabelMap, &'a LabelMap)>, EvalError> {
    if pred.len() != gt.len() {
        return Err(EvalError::Dimensions(format!("{} predicted frames, {} ground-truth frames", pred.len(), gt.len())));
    }
    if let (Some(a), Some(b)) = (pred.dims(), gt.dims()) {
        if a != b {
            return Err(EvalError::Dimensions(format!("prediction is {}x{}, ground truth {}x{}", a.0, a.1, b.0, b.1)));
        }
    }
    let pairs: Vec<_> = pred
        .frames()
        .iter()
        .zip(gt.frames())
        .filter_map(|(p, g)| Some((p.as_ref()?, g.as_ref()?)))
        .collect();
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(pairs)
}

/// Pixel counts of one frame: joint `(pred, gt)` and marginals.
struct Confusion {
    joint: Vec<usize>,
    pred: [usize; 256],
    gt: [usize; 256],
}

impl Confusion {
    fn new(pred: &LabelMap, gt: &LabelMap) -> Self {
        let mut joint = vec![0; 256 * 256];
        let mut p = [0; 256];
        let mut g = [0; 256];
        for (&a, &b) in pred.data().iter().zip(gt.data()) {
            joint[a as usize * 256 + b as usize] += 1;
            p[a as usize] += 1;
            g[b as usize] += 1;
        }
        Self { joint, pred: p, gt: g }
    }

    /// IoU of `pred == a` against `gt == b`; 1 when both are empty.
    fn iou(&self, a: u8, b: u8) -> f64 {
        let inter = self.joint[a as usize * 256 + b as usize];
        let union = self.pred[a as usize] + self.gt[b as usize] - inter;
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// Per-frame J and F of binary sequences (non-zero is foreground), over the
/// frames that have ground truth.
pub fn binary_scores(
    pred: &LabelMaskSequence,
    gt: &LabelMaskSequence,
) -> Result<(MetricReport, MetricReport), EvalError> {
    let pairs = paired(pred, gt)?;
    let mut js = Vec::with_capacity(pairs.len());
    let mut fs = Vec::with_capacity(pairs.len());
    for (p, g) in pairs {
        let (w, h) = (g.width(), g.height());
        let pm: Vec<bool> = p.data().iter().map(|&l| l != 0).collect();
        let gm: Vec<bool> = g.data().iter().map(|&l| l != 0).collect();
        js.push(jaccard(&pm, &gm)?);
        fs.push(boundary_f(&pm, &gm, w, h, default_tolerance(w, h))?);
    }
    Ok((davis_aggregate(&js)?, davis_aggregate(&fs)?))
}

/// Binary sequence marking labels in `set` as foreground.
pub fn foreground_of(pred: &LabelMaskSequence, set: &[u8]) -> LabelMaskSequence {
    pred.relabel(|l| u8::from(set.contains(&l)))
}

/// Binary evaluation with the largest predicted segment as background.
pub fn binary_background_scores(
    pred: &LabelMaskSequence,
    gt: &LabelMaskSequence,
) -> Result<(MetricReport, MetricReport), EvalError> {
    let maps: Vec<LabelMap> = pred.frames().iter().flatten().cloned().collect();
    let bg = background_label(&maps);
    binary_scores(&pred.relabel(|l| u8::from(l != bg)), gt)
}

/// Predicted-label subset whose union best matches the binary ground truth
/// (summed per-frame Jaccard over annotated frames), with the induced binary
/// sequence.
///
/// Candidates are the nonempty proper subsets of the labels present in the
/// prediction (the single label itself if only one is present). Ties go to
/// the smaller subset, then to the lexicographically smaller one.
pub fn select_foreground_subset(
    pred: &LabelMaskSequence,
    gt: &LabelMaskSequence,
) -> Result<(Vec<u8>, LabelMaskSequence), EvalError> {
    let pairs = paired(pred, gt)?;
    let labels: Vec<u8> = pred.labels().into_iter().collect();
    if labels.len() > MAX_SUBSET_LABELS {
        return Err(EvalError::TooManyLabels(labels.len()));
    }
    let confusions: Vec<Confusion> = pairs.iter().map(|(p, g)| Confusion::new(p, g)).collect();
    let mut candidates: Vec<Vec<u8>> = if labels.len() == 1 {
        vec![labels.clone()]
    } else {
        (1..(1u32 << labels.len()) - 1)
            .map(|bits| labels.iter().enumerate().filter(|(j, _)| bits >> j & 1 == 1).map(|(_, &l)| l).collect())
            .collect()
    };
    candidates.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let mut best: Option<(f64, &Vec<u8>)> = None;
    for set in &candidates {
        let score = subset_score(&confusions, set);
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, set));
        }
    }
    let set = best.expect("at least one candidate").1.clone();
    let induced = foreground_of(pred, &set);
    Ok((set, induced))
}

/// `Σ_t J(∪ set, gt ≠ 0)` from per-frame confusion counts.
fn subset_score(confusions: &[Confusion], set: &[u8]) -> f64 {
    confusions
        .iter()
        .map(|c| {
            let mut inter = 0;
            let mut pred = 0;
            for &l in set {
                pred += c.pred[l as usize];
                inter += c.pred[l as usize] - c.joint[l as usize * 256];
            }
            let gt = c.gt[1..].iter().sum::<usize>();
            let union = pred + gt - inter;
            if union == 0 {
                1.0
            } else {
                inter as f64 / union as f64
            }
        })
        .sum()
}

/// Result of one-to-one sequence-level matching.
#[derive(Debug, Clone, PartialEq)]
pub struct HungarianReport {
    /// Every non-zero ground-truth label with its matched prediction.
    pub matches: Vec<(u8, Option<u8>)>,
    /// Mean per-frame J of each matched pair (0 when unmatched).
    pub j: Vec<f64>,
    pub f: Vec<f64>,
    pub j_mean: f64,
    pub f_mean: f64,
    pub jf: f64,
}

/// One-to-one matching of predicted labels to the non-zero ground-truth
/// labels maximizing the summed sequence-level IoU, where the IoU of a pair
/// is its mean per-frame Jaccard over annotated frames.
pub fn hungarian_sequence_match(pred: &LabelMaskSequence, gt: &LabelMaskSequence) -> Result<HungarianReport, EvalError> {
    let pairs = paired(pred, gt)?;
    let gt_labels: Vec<u8> = gt.labels().into_iter().filter(|&l| l != 0).collect();
    if gt_labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let pred_labels: Vec<u8> = pred.labels().into_iter().collect();
    let confusions: Vec<Confusion> = pairs.iter().map(|(p, g)| Confusion::new(p, g)).collect();
    let n = confusions.len() as f64;
    let seq_iou = |a: u8, b: u8| confusions.iter().map(|c| c.iou(a, b)).sum::<f64>() / n;
    let cost: Vec<Vec<f64>> = gt_labels.iter().map(|&g| pred_labels.iter().map(|&p| -seq_iou(p, g)).collect()).collect();
    let assignment = assign_min(&cost);

    let mut matches = Vec::new();
    let mut js = Vec::new();
    let mut fs = Vec::new();
    for (&g, a) in gt_labels.iter().zip(&assignment) {
        let p = a.map(|c| pred_labels[c]);
        matches.push((g, p));
        match p {
            Some(p) => {
                js.push(seq_iou(p, g));
                let mut f = 0.0;
                for (pm, gm) in &pairs {
                    let (w, h) = (gm.width(), gm.height());
                    f += boundary_f(&pm.mask(p), &gm.mask(g), w, h, default_tolerance(w, h))?;
                }
                fs.push(f / n);
            }
            None => {
                js.push(0.0);
                fs.push(0.0);
            }
        }
    }
    let j_mean = js.iter().sum::<f64>() / js.len() as f64;
    let f_mean = fs.iter().sum::<f64>() / fs.len() as f64;
    Ok(HungarianReport { matches, j: js, f: fs, j_mean, f_mean, jf: (j_mean + f_mean) / 2.0 })
}

/// `(frame, gt label)` pairs present in the ground truth.
fn present_segments(pairs: &[(&LabelMap, &LabelMap)]) -> Vec<(usize, u8)> {
    pairs
        .iter()
        .enumerate()
        .flat_map(|(t, (_, g))| g.labels().into_iter().map(move |l| (t, l)))
        .collect()
}

/// Mean over annotated frames and the ground-truth segments present in each
/// (background included) of the best IoU achieved by any predicted label in
/// that frame.
pub fn bootstrap_iou(pred: &LabelMaskSequence, gt: &LabelMaskSequence) -> Result<f64, EvalError> {
    let pairs = paired(pred, gt)?;
    let confusions: Vec<Confusion> = pairs.iter().map(|(p, g)| Confusion::new(p, g)).collect();
    let present = present_segments(&pairs);
    let total: f64 = present
        .iter()
        .map(|&(t, g)| {
            pairs[t].0.labels().into_iter().map(|p| confusions[t].iou(p, g)).fold(0.0, f64::max)
        })
        .sum();
    Ok(total / present.len() as f64)
}

/// One-to-one matching of predicted labels to all ground-truth labels
/// (background included) maximizing the summed per-frame IoU, scored like
/// [`bootstrap_iou`] with each segment restricted to its matched prediction.
pub fn linear_assignment_score(pred: &LabelMaskSequence, gt: &LabelMaskSequence) -> Result<f64, EvalError> {
    let pairs = paired(pred, gt)?;
    let (mapping, _) = linear_assignment(&pairs)?;
    let confusions: Vec<Confusion> = pairs.iter().map(|(p, g)| Confusion::new(p, g)).collect();
    let present = present_segments(&pairs);
    let total: f64 = present
        .iter()
        .map(|&(t, g)| match mapping.iter().find(|(gl, _)| *gl == g).and_then(|m| m.1) {
            Some(p) => confusions[t].iou(p, g),
            None => 0.0,
        })
        .sum();
    Ok(total / present.len() as f64)
}

/// Ground-truth label → predicted label of the linear assignment.
pub fn linear_assignment_mapping(
    pred: &LabelMaskSequence,
    gt: &LabelMaskSequence,
) -> Result<Vec<(u8, Option<u8>)>, EvalError> {
    Ok(linear_assignment(&paired(pred, gt)?)?.0)
}

fn linear_assignment(pairs: &[(&LabelMap, &LabelMap)]) -> Result<(Vec<(u8, Option<u8>)>, f64), EvalError> {
    let gt_labels: BTreeSet<u8> = pairs.iter().flat_map(|(_, g)| g.labels()).collect();
    let pred_labels: Vec<u8> = pairs.iter().flat_map(|(p, _)| p.labels()).collect::<BTreeSet<_>>().into_iter().collect();
    let confusions: Vec<Confusion> = pairs.iter().map(|(p, g)| Confusion::new(p, g)).collect();
    // Only frames where the gt segment is present count towards its score.
    let score = |p: u8, g: u8| confusions.iter().filter(|c| c.gt[g as usize] > 0).map(|c| c.iou(p, g)).sum::<f64>();
    let gt_labels: Vec<u8> = gt_labels.into_iter().collect();
    let cost: Vec<Vec<f64>> = gt_labels.iter().map(|&g| pred_labels.iter().map(|&p| -score(p, g)).collect()).collect();
    let assignment = assign_min(&cost);
    let total = assignment.iter().enumerate().filter_map(|(r, c)| c.map(|c| -cost[r][c])).sum();
    let mapping = gt_labels.iter().zip(assignment).map(|(&g, a)| (g, a.map(|c| pred_labels[c]))).collect();
    Ok((mapping, total))
}

/// One row of the per-video binary table.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoScores {
    pub video: String,
    pub j: MetricReport,
    pub f: MetricReport,
}

pub const DAVIS_HEADER: [&str; 7] = ["video", "J(M)", "J(O)", "J(D)", "F(M)", "F(O)", "F(D)"];

/// Per-video rows followed by a `mean` row averaging the video scores.
pub fn write_davis_csv(rows: &[VideoScores], out: impl Write) -> Result<(), EvalError> {
    let err = |e: csv::Error| EvalError::Csv(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DAVIS_HEADER).map_err(err)?;
    let mut sums = [0.0; 6];
    for r in rows {
        let vals = [r.j.mean, r.j.recall, r.j.decay, r.f.mean, r.f.recall, r.f.decay];
        for (s, v) in sums.iter_mut().zip(vals) {
            *s += v;
        }
        w.write_record(std::iter::once(r.video.clone()).chain(vals.iter().map(|v| format!("{v:.6}")))).map_err(err)?;
    }
    if !rows.is_empty() {
        let n = rows.len() as f64;
        w.write_record(std::iter::once("mean".to_string()).chain(sums.iter().map(|s| format!("{:.6}", s / n))))
            .map_err(err)?;
    }
    w.flush().map_err(|e| EvalError::Csv(e.to_string()))
}
