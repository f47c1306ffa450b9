//! Detection evaluation at IoU 0.5: greedy matching, FP ratio, and
//! all-points-interpolated average precision.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::coco::CocoDataset;
use crate::error::{Error, Result};
use crate::filter::Detection;
use crate::geometry::Rect;

pub const IOU_THRESHOLD: f64 = 0.5;

pub fn iou(a: &Rect, b: &Rect) -> f64 {
    a.iou(b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub image_id: u64,
    pub bbox: Rect,
    pub category: String,
}

/// Ground truth from a COCO file; category names come from its own table.
pub fn ground_truth_from_coco(ds: &CocoDataset) -> Result<Vec<GroundTruth>> {
    let names: HashMap<u64, &str> = ds.categories.iter().map(|c| (c.id, c.name.as_str())).collect();
    ds.annotations
        .iter()
        .map(|a| {
            let name = names
                .get(&a.category_id)
                .ok_or_else(|| Error::UnknownCategory(format!("id {}", a.category_id)))?;
            Ok(GroundTruth {
                image_id: a.image_id,
                bbox: Rect::from_xywh(a.bbox)?,
                category: name.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "TP")]
    Tp,
    #[serde(rename = "FP")]
    Fp,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchOutcome {
    /// One label per input detection, in input order.
    pub labels: Vec<Label>,
    /// One flag per ground-truth entry, in input order.
    pub gt_matched: Vec<bool>,
}

impl MatchOutcome {
    pub fn tp(&self) -> usize {
        self.labels.iter().filter(|&&l| l == Label::Tp).count()
    }

    pub fn fp(&self) -> usize {
        self.labels.len() - self.tp()
    }
}

/// Confidence-descending order; equal confidences keep input order.
fn by_confidence(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].confidence.total_cmp(&dets[a].confidence).then(a.cmp(&b)));
    order
}

/// Greedy matching: in confidence order, each detection claims the still
/// unmatched same-image, same-class ground truth with the highest IoU at or
/// above `iou_thresh`; otherwise it is a false positive.
pub fn match_detections(dets: &[Detection], gts: &[GroundTruth], iou_thresh: f64) -> MatchOutcome {
    let mut labels = vec![Label::Fp; dets.len()];
    let mut gt_matched = vec![false; gts.len()];
    for d in by_confidence(dets) {
        let det = &dets[d];
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if gt_matched[g] || gt.image_id != det.image_id || gt.category != det.category {
                continue;
            }
            let o = det.bbox.iou(&gt.bbox);
            if o >= iou_thresh && best.is_none_or(|(_, bo)| o > bo) {
                best = Some((g, o));
            }
        }
        if let Some((g, _)) = best {
            gt_matched[g] = true;
            labels[d] = Label::Tp;
        }
    }
    MatchOutcome { labels, gt_matched }
}

/// False positives over all labeled detections.
pub fn fp_ratio(labels: &[Label]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::NoDetections);
    }
    let fp = labels.iter().filter(|&&l| l == Label::Fp).count();
    Ok(fp as f64 / labels.len() as f64)
}

/// FP ratio over detections of `classes` with confidence >= `min_confidence`.
pub fn fp_ratio_for(dets: &[Detection], gts: &[GroundTruth], classes: &[String], min_confidence: f64) -> Result<f64> {
    let picked: Vec<Detection> = dets
        .iter()
        .filter(|d| classes.contains(&d.category) && d.confidence >= min_confidence)
        .cloned()
        .collect();
    let outcome = match_detections(&picked, gts, IOU_THRESHOLD);
    fp_ratio(&outcome.labels)
}

/// Area under the precision envelope for labels already in confidence order.
pub fn average_precision(ranked: &[Label], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let mut recall = vec![0.0];
    let mut precision = vec![0.0];
    let (mut tp, mut fp) = (0usize, 0usize);
    for l in ranked {
        match l {
            Label::Tp => tp += 1,
            Label::Fp => fp += 1,
        }
        recall.push(tp as f64 / num_gt as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    recall.push(1.0);
    precision.push(0.0);
    for i in (0..precision.len() - 1).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    recall
        .windows(2)
        .zip(&precision[1..])
        .map(|(r, p)| (r[1] - r[0]) * p)
        .sum()
}

pub fn ap50(dets: &[Detection], gts: &[GroundTruth], class: &str) -> Result<f64> {
    let class_gts: Vec<GroundTruth> = gts.iter().filter(|g| g.category == class).cloned().collect();
    if class_gts.is_empty() {
        return Err(Error::NoGroundTruth(class.to_string()));
    }
    let class_dets: Vec<Detection> = dets.iter().filter(|d| d.category == class).cloned().collect();
    let outcome = match_detections(&class_dets, &class_gts, IOU_THRESHOLD);
    let ranked: Vec<Label> = by_confidence(&class_dets).into_iter().map(|i| outcome.labels[i]).collect();
    Ok(average_precision(&ranked, class_gts.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    pub per_class_ap: BTreeMap<String, f64>,
    /// Mean over classes with ground truth; `None` when there are none.
    pub map50: Option<f64>,
    /// Classes without ground truth, left out of the mean.
    pub excluded_classes: Vec<String>,
}

pub fn map50(dets: &[Detection], gts: &[GroundTruth], classes: &[String]) -> MapReport {
    let mut per_class_ap = BTreeMap::new();
    let mut excluded_classes = Vec::new();
    for c in classes {
        match ap50(dets, gts, c) {
            Ok(ap) => {
                per_class_ap.insert(c.clone(), ap);
            }
            Err(_) => excluded_classes.push(c.clone()),
        }
    }
    let map50 = (!per_class_ap.is_empty()).then(|| per_class_ap.values().sum::<f64>() / per_class_ap.len() as f64);
    MapReport {
        per_class_ap,
        map50,
        excluded_classes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class_ap: BTreeMap<String, f64>,
    pub map50: Option<f64>,
    pub fp_ratio_before: Option<f64>,
    pub fp_ratio_after: Option<f64>,
    pub excluded_classes: Vec<String>,
    pub min_confidence: f64,
}

/// AP is computed on the filtered detections; FP ratios on novel classes
/// before and after filtering.
pub fn metrics_report(
    gts: &[GroundTruth],
    before: &[Detection],
    after: &[Detection],
    novel: &[String],
    min_confidence: f64,
) -> MetricsReport {
    let m = map50(after, gts, novel);
    MetricsReport {
        per_class_ap: m.per_class_ap,
        map50: m.map50,
        fp_ratio_before: fp_ratio_for(before, gts, novel, min_confidence).ok(),
        fp_ratio_after: fp_ratio_for(after, gts, novel, min_confidence).ok(),
        excluded_classes: m.excluded_classes,
        min_confidence,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(x: f64, y: f64, w: f64, h: f64) -> Rect {
        Rect::from_xywh([x, y, w, h]).unwrap()
    }

    fn det(bbox: Rect, conf: f64) -> Detection {
        Detection {
            image_id: 1,
            bbox,
            category: "cow".into(),
            confidence: conf,
        }
    }

    fn gt(bbox: Rect) -> GroundTruth {
        GroundTruth {
            image_id: 1,
            bbox,
            category: "cow".into(),
        }
    }

    #[test]
    fn iou_examples() {
        let a = rect(0., 0., 2., 2.);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &rect(5., 5., 1., 1.)), 0.0);
        assert!((iou(&a, &rect(1., 0., 2., 2.)) - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn matching_examples() {
        let g = [gt(rect(0., 0., 10., 10.))];
        let one = match_detections(&[det(rect(0., 0., 10., 10.), 0.9)], &g, 0.5);
        assert_eq!(one.labels, vec![Label::Tp]);
        assert_eq!(one.gt_matched, vec![true]);

        let two = match_detections(&[det(rect(0., 0., 10., 10.), 0.6), det(rect(0., 0., 10., 10.), 0.9)], &g, 0.5);
        assert_eq!(two.labels, vec![Label::Fp, Label::Tp]);

        // 4x10 overlap of two 10x10 boxes: 40 / 160 = 0.25
        let weak = det(rect(6., 0., 10., 10.), 0.9);
        assert!(iou(&weak.bbox, &g[0].bbox) < 0.5);
        assert_eq!(match_detections(&[weak], &g, 0.5).labels, vec![Label::Fp]);

        let mut other_image = det(rect(0., 0., 10., 10.), 0.9);
        other_image.image_id = 2;
        assert_eq!(match_detections(&[other_image], &g, 0.5).labels, vec![Label::Fp]);
    }

    #[test]
    fn iou_point_four_is_false_positive() {
        // 10x10 pair shifted by s: (10 - s) * 10 / (200 - (10 - s) * 10) = 0.4 -> s = 10 - 40/7
        let s = 10.0 - 40.0 / 7.0;
        let d = det(rect(s, 0., 10., 10.), 0.9);
        let g = [gt(rect(0., 0., 10., 10.))];
        assert!((iou(&d.bbox, &g[0].bbox) - 0.4).abs() < 1e-12);
        assert_eq!(match_detections(&[d], &g, 0.5).labels, vec![Label::Fp]);
    }

    #[test]
    fn fp_ratio_examples() {
        assert_eq!(fp_ratio(&[Label::Tp, Label::Tp]).unwrap(), 0.0);
        assert_eq!(fp_ratio(&[Label::Fp]).unwrap(), 1.0);
        assert_eq!(fp_ratio(&[Label::Tp, Label::Tp, Label::Fp, Label::Tp]).unwrap(), 0.25);
        assert!(matches!(fp_ratio(&[]), Err(Error::NoDetections)));
    }

    #[test]
    fn ap_examples() {
        let g = [gt(rect(0., 0., 10., 10.))];
        assert_eq!(ap50(&[det(rect(0., 0., 10., 10.), 0.9)], &g, "cow").unwrap(), 1.0);
        assert_eq!(ap50(&[det(rect(50., 50., 10., 10.), 0.9)], &g, "cow").unwrap(), 0.0);
        let fp_then_tp = [det(rect(50., 50., 10., 10.), 0.9), det(rect(0., 0., 10., 10.), 0.8)];
        assert!((ap50(&fp_then_tp, &g, "cow").unwrap() - 0.5).abs() < 1e-9);
        assert!(matches!(ap50(&fp_then_tp, &g, "bus"), Err(Error::NoGroundTruth(_))));
    }

    #[test]
    fn map_excludes_classes_without_ground_truth() {
        let g = [gt(rect(0., 0., 10., 10.))];
        let r = map50(&[det(rect(0., 0., 10., 10.), 0.9)], &g, &["cow".into(), "bus".into()]);
        assert_eq!(r.map50, Some(1.0));
        assert_eq!(r.excluded_classes, vec!["bus".to_string()]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_rect() -> impl Strategy<Value = Rect> {
            (0f64..50., 0f64..50., 0.5f64..30., 0.5f64..30.).prop_map(|(x, y, w, h)| rect(x, y, w, h))
        }

        proptest! {
            #[test]
            fn iou_is_symmetric_and_bounded(a in any_rect(), b in any_rect()) {
                prop_assert!((iou(&a, &b) - iou(&b, &a)).abs() < 1e-12);
                prop_assert!(iou(&a, &b) <= 1.0 && iou(&a, &b) >= 0.0);
                prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
            }

            #[test]
            fn ap_ignores_monotone_confidence_rescaling(
                boxes in proptest::collection::vec((any_rect(), 0.01f64..1.0), 1..12),
                gts in proptest::collection::vec(any_rect(), 1..5),
                k in 0.1f64..10.0,
            ) {
                let g: Vec<GroundTruth> = gts.into_iter().map(gt).collect();
                let d: Vec<Detection> = boxes.iter().map(|&(b, c)| det(b, c)).collect();
                let rescaled: Vec<Detection> = boxes.iter().map(|&(b, c)| det(b, (c * k).sqrt())).collect();
                prop_assert_eq!(ap50(&d, &g, "cow").unwrap(), ap50(&rescaled, &g, "cow").unwrap());
            }
        }
    }
}
