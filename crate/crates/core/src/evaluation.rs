//! Point-detection scoring: per-class TP/FP/FN under three matching
//! protocols, and F1 reporting.
//!
//! * [`Protocol::Matched`] thresholds the gt/pred distance graph at the
//!   radius and takes a maximum bipartite matching. This is the correct
//!   protocol.
//! * [`Protocol::RawHungarian`] solves min-cost assignment on raw distances
//!   and filters afterwards. A detection can be pulled to a distant gt, so
//!   it undercounts TPs.
//! * [`Protocol::Greedy`] counts every in-radius prediction as a TP, so it
//!   overcounts them.
//!
//! Matching is always per class: a prediction only ever pairs with a
//! ground truth of the same class.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assignment::{solve_max_matching, solve_min_cost, BoolMatrix, CostMatrix};
use crate::error::{Error, Result};
use crate::points::LabeledPoint;

/// Default ground-truth radius in pixels.
pub const DEFAULT_RADIUS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Matched,
    RawHungarian,
    Greedy,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Matched, Protocol::RawHungarian, Protocol::Greedy];

    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::Matched => "matched",
            Protocol::RawHungarian => "raw-hungarian",
            Protocol::Greedy => "greedy",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matched" => Ok(Protocol::Matched),
            "raw-hungarian" | "raw_hungarian" => Ok(Protocol::RawHungarian),
            "greedy" => Ok(Protocol::Greedy),
            other => Err(Error::InvalidConfig(format!("unknown protocol {other:?}"))),
        }
    }
}

/// How per-image counts are turned into a dataset score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregate {
    /// Sum TP/FP/FN over images, then compute F1.
    DatasetCounts,
    /// Average per-image F1 over images where the class occurs.
    PerImageMean,
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregate::DatasetCounts => "dataset-counts",
            Aggregate::PerImageMean => "per-image-mean",
        })
    }
}

impl FromStr for Aggregate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dataset-counts" | "dataset_counts" => Ok(Aggregate::DatasetCounts),
            "per-image-mean" | "per_image_mean" => Ok(Aggregate::PerImageMean),
            other => Err(Error::InvalidConfig(format!("unknown aggregate {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub radius: f64,
    pub protocol: Protocol,
    pub class_ids: Vec<u32>,
    pub aggregate: Aggregate,
}

impl EvalConfig {
    pub fn new(radius: f64, protocol: Protocol, class_ids: Vec<u32>) -> Result<Self> {
        let config = Self {
            radius,
            protocol,
            class_ids,
            aggregate: Aggregate::DatasetCounts,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "radius must be > 0, got {}",
                self.radius
            )));
        }
        if self.class_ids.is_empty() {
            return Err(Error::InvalidConfig("class_ids must not be empty".into()));
        }
        let unique: BTreeSet<_> = self.class_ids.iter().collect();
        if unique.len() != self.class_ids.len() {
            return Err(Error::InvalidConfig("class_ids must be unique".into()));
        }
        if self.class_ids.contains(&0) {
            return Err(Error::InvalidConfig("class_id 0 is reserved for background".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassCounts {
    pub class_id: u32,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ClassCounts {
    pub fn zero(class_id: u32) -> Self {
        Self {
            class_id,
            ..Self::default()
        }
    }

    pub fn f1(&self) -> f64 {
        f1_from_counts(self)
    }

    pub fn is_empty(&self) -> bool {
        self.tp == 0 && self.fp == 0 && self.fn_ == 0
    }
}

impl Add for ClassCounts {
    type Output = ClassCounts;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for ClassCounts {
    fn add_assign(&mut self, rhs: Self) {
        debug_assert_eq!(self.class_id, rhs.class_id);
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
    }
}

/// `TP / (TP + (FP + FN) / 2)`, or 0 when all three counts are zero.
pub fn f1_from_counts(counts: &ClassCounts) -> f64 {
    let denom = counts.tp as f64 + 0.5 * (counts.fp + counts.fn_) as f64;
    if denom == 0.0 {
        0.0
    } else {
        counts.tp as f64 / denom
    }
}

fn split_by_class(points: &[LabeledPoint]) -> BTreeMap<u32, Vec<LabeledPoint>> {
    let mut out: BTreeMap<u32, Vec<LabeledPoint>> = BTreeMap::new();
    for p in points {
        out.entry(p.class_id).or_default().push(*p);
    }
    out
}

type Counter = fn(&[LabeledPoint], &[LabeledPoint], f64) -> (usize, usize, usize);

fn per_class(
    gts: &[LabeledPoint],
    preds: &[LabeledPoint],
    radius: f64,
    count: Counter,
) -> Vec<ClassCounts> {
    let gt_by = split_by_class(gts);
    let pred_by = split_by_class(preds);
    let classes: BTreeSet<u32> = gt_by.keys().chain(pred_by.keys()).copied().collect();
    let empty = Vec::new();
    classes
        .into_iter()
        .map(|class_id| {
            let g = gt_by.get(&class_id).unwrap_or(&empty);
            let p = pred_by.get(&class_id).unwrap_or(&empty);
            let (tp, fp, fn_) = count(g, p, radius);
            ClassCounts {
                class_id,
                tp,
                fp,
                fn_,
            }
        })
        .collect()
}

fn within(gt: &LabeledPoint, pred: &LabeledPoint, radius: f64) -> bool {
    gt.distance_to(pred.x, pred.y) <= radius
}

/// Threshold-then-match counts for one class.
pub fn count_thresholded(gts: &[LabeledPoint], preds: &[LabeledPoint], radius: f64) -> (usize, usize, usize) {
    let adjacency = BoolMatrix::from_fn(gts.len(), preds.len(), |i, j| within(&gts[i], &preds[j], radius));
    let tp = solve_max_matching(&adjacency).len();
    (tp, preds.len() - tp, gts.len() - tp)
}

/// Assign-on-raw-distances-then-filter counts for one class.
pub fn count_raw_hungarian(gts: &[LabeledPoint], preds: &[LabeledPoint], radius: f64) -> (usize, usize, usize) {
    let mut values = Vec::with_capacity(gts.len() * preds.len());
    for g in gts {
        for p in preds {
            values.push(g.distance_to(p.x, p.y));
        }
    }
    let costs = CostMatrix::new(gts.len(), preds.len(), values).expect("finite coordinates");
    let tp = solve_min_cost(&costs)
        .pairs
        .iter()
        .filter(|&&(i, j)| costs.get(i, j) <= radius)
        .count();
    (tp, preds.len() - tp, gts.len() - tp)
}

/// One-to-many counts for one class: every prediction within radius of some
/// gt is a TP, every gt with any prediction within radius is covered.
pub fn count_greedy(gts: &[LabeledPoint], preds: &[LabeledPoint], radius: f64) -> (usize, usize, usize) {
    let tp = preds
        .iter()
        .filter(|p| gts.iter().any(|g| within(g, p, radius)))
        .count();
    let fn_ = gts
        .iter()
        .filter(|g| !preds.iter().any(|p| within(g, p, radius)))
        .count();
    (tp, preds.len() - tp, fn_)
}

/// Counts for every class present in either set, ascending by class id.
pub fn match_thresholded(gts: &[LabeledPoint], preds: &[LabeledPoint], radius: f64) -> Vec<ClassCounts> {
    per_class(gts, preds, radius, count_thresholded)
}

pub fn match_raw_hungarian(gts: &[LabeledPoint], preds: &[LabeledPoint], radius: f64) -> Vec<ClassCounts> {
    per_class(gts, preds, radius, count_raw_hungarian)
}

pub fn match_greedy(gts: &[LabeledPoint], preds: &[LabeledPoint], radius: f64) -> Vec<ClassCounts> {
    per_class(gts, preds, radius, count_greedy)
}

pub fn match_with(protocol: Protocol, gts: &[LabeledPoint], preds: &[LabeledPoint], radius: f64) -> Vec<ClassCounts> {
    match protocol {
        Protocol::Matched => match_thresholded(gts, preds, radius),
        Protocol::RawHungarian => match_raw_hungarian(gts, preds, radius),
        Protocol::Greedy => match_greedy(gts, preds, radius),
    }
}

/// Ground truth and predictions of one image.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImagePoints {
    pub gts: Vec<LabeledPoint>,
    pub preds: Vec<LabeledPoint>,
}

/// Images keyed by id, in sorted id order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    images: BTreeMap<String, ImagePoints>,
}

impl Dataset {
    /// Joins per-image gt and prediction lists by image id.
    ///
    /// Images missing from `preds` get no predictions; prediction-only images
    /// get no ground truth. An id repeated within one side is an error.
    pub fn from_collections<G, P>(gts: G, preds: P) -> Result<Self>
    where
        G: IntoIterator<Item = (String, Vec<LabeledPoint>)>,
        P: IntoIterator<Item = (String, Vec<LabeledPoint>)>,
    {
        let mut images: BTreeMap<String, ImagePoints> = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for (id, points) in gts {
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateImage(id));
            }
            images.entry(id).or_default().gts = points;
        }
        seen.clear();
        for (id, points) in preds {
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateImage(id));
            }
            images.entry(id).or_default().preds = points;
        }
        Ok(Self { images })
    }

    pub fn single(gts: Vec<LabeledPoint>, preds: Vec<LabeledPoint>) -> Self {
        let mut images = BTreeMap::new();
        images.insert(String::from("0"), ImagePoints { gts, preds });
        Self { images }
    }

    pub fn insert(&mut self, id: impl Into<String>, image: ImagePoints) -> Option<ImagePoints> {
        self.images.insert(id.into(), image)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> impl Iterator<Item = (&str, &ImagePoints)> {
        self.images.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Class ids occurring anywhere in the dataset, ascending.
    pub fn class_ids(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self
            .images
            .values()
            .flat_map(|img| img.gts.iter().chain(&img.preds))
            .map(|p| p.class_id)
            .collect();
        set.into_iter().collect()
    }
}

/// Per-class counts of one image under `config`, in `config.class_ids` order.
pub fn image_counts(image: &ImagePoints, config: &EvalConfig) -> Result<Vec<ClassCounts>> {
    if let Some(p) = image
        .gts
        .iter()
        .chain(&image.preds)
        .find(|p| !config.class_ids.contains(&p.class_id))
    {
        return Err(Error::UnknownClass(p.class_id));
    }
    let found = match_with(config.protocol, &image.gts, &image.preds, config.radius);
    Ok(config
        .class_ids
        .iter()
        .map(|&c| {
            found
                .iter()
                .find(|cc| cc.class_id == c)
                .copied()
                .unwrap_or_else(|| ClassCounts::zero(c))
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    #[serde(flatten)]
    pub counts: ClassCounts,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub aggregate: Aggregate,
    pub radius: f64,
    pub images: usize,
    pub per_class: Vec<ClassReport>,
    pub macro_f1: f64,
}

impl EvalReport {
    pub fn class(&self, class_id: u32) -> Option<&ClassReport> {
        self.per_class.iter().find(|c| c.counts.class_id == class_id)
    }

    /// Combines per-image counts (each in `config.class_ids` order).
    ///
    /// Summation is order independent, so images may be scored in parallel.
    pub fn from_image_counts(per_image: &[Vec<ClassCounts>], config: &EvalConfig) -> Self {
        let per_class = config
            .class_ids
            .iter()
            .enumerate()
            .map(|(k, &class_id)| {
                let counts = per_image
                    .iter()
                    .fold(ClassCounts::zero(class_id), |acc, img| acc + img[k]);
                let f1 = match config.aggregate {
                    Aggregate::DatasetCounts => counts.f1(),
                    Aggregate::PerImageMean => {
                        let scores: Vec<f64> = per_image
                            .iter()
                            .map(|img| img[k])
                            .filter(|c| !c.is_empty())
                            .map(|c| c.f1())
                            .collect();
                        if scores.is_empty() {
                            0.0
                        } else {
                            scores.iter().sum::<f64>() / scores.len() as f64
                        }
                    }
                };
                ClassReport { counts, f1 }
            })
            .collect::<Vec<_>>();
        let macro_f1 = macro_average(per_class.iter().map(|c| c.f1));
        Self {
            protocol: config.protocol,
            aggregate: config.aggregate,
            radius: config.radius,
            images: per_image.len(),
            per_class,
            macro_f1,
        }
    }
}

/// Arithmetic mean over all configured classes; absent classes count as 0.
pub fn macro_average(f1s: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = f1s.into_iter().fold((0.0, 0usize), |(s, n), f| (s + f, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn evaluate_dataset(dataset: &Dataset, config: &EvalConfig) -> Result<EvalReport> {
    config.validate()?;
    let per_image = dataset
        .images()
        .map(|(_, img)| image_counts(img, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_image_counts(&per_image, config))
}

/// Relative change of `value` against `reference` in percent; `None` when
/// the reference is zero.
pub fn delta_percent(value: f64, reference: f64) -> Option<f64> {
    (reference != 0.0).then(|| 100.0 * (value - reference) / reference)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDelta {
    pub class_id: u32,
    pub f1: f64,
    pub delta_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub protocol: Protocol,
    pub per_class: Vec<ClassDelta>,
    pub macro_f1: f64,
    pub macro_delta_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolComparison {
    pub radius: f64,
    pub aggregate: Aggregate,
    pub rows: Vec<ComparisonRow>,
    pub reports: Vec<EvalReport>,
}

impl ProtocolComparison {
    /// Builds Δ% rows from one report per protocol; the matched report is
    /// the reference.
    pub fn from_reports(reports: Vec<EvalReport>) -> Self {
        let reference = reports
            .iter()
            .find(|r| r.protocol == Protocol::Matched)
            .cloned()
            .expect("comparison includes the matched protocol");
        let rows = reports
            .iter()
            .map(|report| ComparisonRow {
                protocol: report.protocol,
                per_class: report
                    .per_class
                    .iter()
                    .zip(&reference.per_class)
                    .map(|(c, base)| ClassDelta {
                        class_id: c.counts.class_id,
                        f1: c.f1,
                        delta_pct: delta_percent(c.f1, base.f1),
                    })
                    .collect(),
                macro_f1: report.macro_f1,
                macro_delta_pct: delta_percent(report.macro_f1, reference.macro_f1),
            })
            .collect();
        Self {
            radius: reference.radius,
            aggregate: reference.aggregate,
            rows,
            reports,
        }
    }

    pub fn row(&self, protocol: Protocol) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.protocol == protocol)
    }
}

/// Runs all three protocols on identical inputs.
pub fn compare_protocols(
    dataset: &Dataset,
    radius: f64,
    class_ids: &[u32],
    aggregate: Aggregate,
) -> Result<ProtocolComparison> {
    let reports = Protocol::ALL
        .iter()
        .map(|&protocol| {
            let config = EvalConfig {
                radius,
                protocol,
                class_ids: class_ids.to_vec(),
                aggregate,
            };
            evaluate_dataset(dataset, &config)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProtocolComparison::from_reports(reports))
}
