//! Training-time matching between ground-truth points and proposals, and the
//! classification / regression losses evaluated on a fixed matching.
//!
//! The matching cost of ground truth `i` and proposal `j` is
//! `tau * |p_i - p_j| - c_j[t_i]`: close and confident proposals are cheap.
//! The hybrid matcher additionally replicates every ground-truth row `beta`
//! times so up to `beta` proposals are assigned to each target.

use serde::{Deserialize, Serialize};

use crate::assignment::{solve_min_cost, CostMatrix};
use crate::error::{Error, Result};
use crate::points::{euclidean, LabeledPoint, PredictedPoint};

/// Lower clamp applied to confidences before taking the log.
pub const LOG_CLAMP: f64 = 1e-12;

pub const DEFAULT_TAU: f64 = 0.05;
pub const DEFAULT_BETA: usize = 2;
pub const DEFAULT_BG_WEIGHT: f64 = 0.5;
pub const DEFAULT_FG_WEIGHT: f64 = 10.0;
pub const DEFAULT_REG_WEIGHT: f64 = 2e-3;
pub const DEFAULT_ONE2MANY_WEIGHT: f64 = 0.5;

/// Matching and loss hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Weight of the pixel distance in the matching cost.
    pub tau: f64,
    /// Proposals per ground truth in the one-to-many branch.
    pub beta: usize,
    /// Cross-entropy weights; index 0 is background, index `t` class `t`.
    pub class_weights: Vec<f64>,
    pub reg_weight: f64,
    pub one2many_weight: f64,
}

impl MatchConfig {
    /// Default hyperparameters for `num_classes` foreground classes.
    pub fn with_defaults(num_classes: usize) -> Self {
        let mut class_weights = vec![DEFAULT_FG_WEIGHT; num_classes + 1];
        class_weights[0] = DEFAULT_BG_WEIGHT;
        Self {
            tau: DEFAULT_TAU,
            beta: DEFAULT_BETA,
            class_weights,
            reg_weight: DEFAULT_REG_WEIGHT,
            one2many_weight: DEFAULT_ONE2MANY_WEIGHT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        // tau = 0 is allowed: matching then follows confidence alone
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return fail(format!("tau must be >= 0, got {}", self.tau));
        }
        if self.beta < 1 {
            return fail("beta must be >= 1".into());
        }
        if self.class_weights.len() < 2 {
            return fail("class_weights needs background plus at least one class".into());
        }
        if let Some(w) = self.class_weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return fail(format!("class weights must be > 0, got {w}"));
        }
        if !(self.reg_weight >= 0.0 && self.reg_weight.is_finite()) {
            return fail(format!("reg_weight must be >= 0, got {}", self.reg_weight));
        }
        if !(self.one2many_weight >= 0.0 && self.one2many_weight.is_finite()) {
            return fail(format!(
                "one2many_weight must be >= 0, got {}",
                self.one2many_weight
            ));
        }
        Ok(())
    }
}

/// Result of one matching pass.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatchOutcome {
    /// `(gt index, proposal index)`, sorted.
    pub matched: Vec<(usize, usize)>,
    /// Proposals left unmatched; supervised as background.
    pub negatives: Vec<usize>,
}

impl MatchOutcome {
    fn from_pairs(num_proposals: usize, mut matched: Vec<(usize, usize)>) -> Self {
        matched.sort_unstable();
        let mut used = vec![false; num_proposals];
        for &(_, j) in &matched {
            used[j] = true;
        }
        Self {
            matched,
            negatives: (0..num_proposals).filter(|&j| !used[j]).collect(),
        }
    }

    /// Sum of Euclidean distances over matched pairs.
    pub fn total_distance(&self, gts: &[LabeledPoint], preds: &[PredictedPoint]) -> f64 {
        self.matched
            .iter()
            .map(|&(i, j)| euclidean(gts[i].x, gts[i].y, preds[j].x, preds[j].y))
            .sum()
    }
}

/// Per-branch losses and their weighted combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub cls_1v1: f64,
    pub reg_1v1: f64,
    pub cls_1vn: f64,
    pub reg_1vn: f64,
    pub combined: f64,
}

impl LossBreakdown {
    pub fn combine(cls_1v1: f64, reg_1v1: f64, cls_1vn: f64, reg_1vn: f64, config: &MatchConfig) -> Self {
        let combined = (cls_1v1 + config.reg_weight * reg_1v1)
            + config.one2many_weight * (cls_1vn + config.reg_weight * reg_1vn);
        Self {
            cls_1v1,
            reg_1v1,
            cls_1vn,
            reg_1vn,
            combined,
        }
    }
}

fn check_class(gt: &LabeledPoint, pred: &PredictedPoint) -> Result<()> {
    let len = pred.confidences.len();
    if gt.class_id == 0 || gt.class_id as usize >= len {
        return Err(Error::ClassOutOfRange {
            class_id: gt.class_id,
            len,
        });
    }
    Ok(())
}

/// `N x M` matrix of `tau * distance - confidence[gt class]`.
pub fn build_cost_matrix(
    gts: &[LabeledPoint],
    preds: &[PredictedPoint],
    tau: f64,
) -> Result<CostMatrix> {
    let mut values = Vec::with_capacity(gts.len() * preds.len());
    for gt in gts {
        for pred in preds {
            check_class(gt, pred)?;
            let dist = euclidean(gt.x, gt.y, pred.x, pred.y);
            values.push(tau * dist - pred.confidences[gt.class_id as usize]);
        }
    }
    CostMatrix::new(gts.len(), preds.len(), values)
}

fn ensure_enough(gts: &[LabeledPoint], preds: &[PredictedPoint]) -> Result<()> {
    if gts.len() > preds.len() {
        return Err(Error::InsufficientProposals {
            gts: gts.len(),
            proposals: preds.len(),
        });
    }
    Ok(())
}

/// Optimal one-to-one matching; every ground truth receives one proposal.
pub fn match_one_to_one(
    gts: &[LabeledPoint],
    preds: &[PredictedPoint],
    config: &MatchConfig,
) -> Result<MatchOutcome> {
    ensure_enough(gts, preds)?;
    let costs = build_cost_matrix(gts, preds, config.tau)?;
    Ok(one_to_one_on(&costs))
}

fn one_to_one_on(costs: &CostMatrix) -> MatchOutcome {
    let assignment = solve_min_cost(costs);
    MatchOutcome::from_pairs(costs.cols(), assignment.pairs)
}

/// Replicates each row `beta` times: gt `i` occupies rows `i*beta..(i+1)*beta`.
pub fn replicate_rows(costs: &CostMatrix, beta: usize) -> CostMatrix {
    let mut values = Vec::with_capacity(costs.rows() * beta * costs.cols());
    for r in 0..costs.rows() {
        for _ in 0..beta {
            values.extend_from_slice(costs.row(r));
        }
    }
    CostMatrix::new(costs.rows() * beta, costs.cols(), values)
        .expect("replicated entries stay finite")
}

/// One-to-one and one-to-many matchings over the same cost matrix.
///
/// When `N * beta` exceeds the number of proposals every proposal is consumed
/// and a warning is logged.
pub fn match_hybrid(
    gts: &[LabeledPoint],
    preds: &[PredictedPoint],
    config: &MatchConfig,
) -> Result<(MatchOutcome, MatchOutcome)> {
    ensure_enough(gts, preds)?;
    if config.beta == 0 {
        return Err(Error::InvalidConfig("beta must be >= 1".into()));
    }
    let costs = build_cost_matrix(gts, preds, config.tau)?;
    let one2one = one_to_one_on(&costs);
    if config.beta == 1 {
        return Ok((one2one.clone(), one2one));
    }
    if gts.len() * config.beta > preds.len() {
        log::warn!(
            "{} ground truths x beta {} exceeds {} proposals; all proposals are matched",
            gts.len(),
            config.beta,
            preds.len()
        );
    }
    let replicated = replicate_rows(&costs, config.beta);
    let assignment = solve_min_cost(&replicated);
    let pairs = assignment
        .pairs
        .into_iter()
        .map(|(row, j)| (row / config.beta, j))
        .collect();
    Ok((one2one, MatchOutcome::from_pairs(preds.len(), pairs)))
}

/// Weighted cross-entropy averaged over all proposals.
///
/// Matched proposals are scored against their ground-truth class, negatives
/// against background.
pub fn classification_loss(
    outcome: &MatchOutcome,
    gts: &[LabeledPoint],
    preds: &[PredictedPoint],
    class_weights: &[f64],
) -> Result<f64> {
    if preds.is_empty() {
        return Ok(0.0);
    }
    let nll = |conf: f64| -conf.max(LOG_CLAMP).ln();
    let weight = |class: usize| -> Result<f64> {
        class_weights.get(class).copied().ok_or(Error::LengthMismatch {
            what: "class_weights",
            expected: class + 1,
            actual: class_weights.len(),
        })
    };
    let mut total = 0.0;
    for &(i, j) in &outcome.matched {
        let (gt, pred) = (&gts[i], &preds[j]);
        check_class(gt, pred)?;
        let class = gt.class_id as usize;
        total += weight(class)? * nll(pred.confidences[class]);
    }
    for &j in &outcome.negatives {
        total += weight(0)? * nll(preds[j].background());
    }
    Ok(total / preds.len() as f64)
}

/// Mean squared distance over matched pairs; 0 when nothing is matched.
pub fn regression_loss(
    outcome: &MatchOutcome,
    gts: &[LabeledPoint],
    preds: &[PredictedPoint],
) -> f64 {
    if outcome.matched.is_empty() {
        return 0.0;
    }
    let sum: f64 = outcome
        .matched
        .iter()
        .map(|&(i, j)| {
            let (dx, dy) = (gts[i].x - preds[j].x, gts[i].y - preds[j].y);
            dx * dx + dy * dy
        })
        .sum();
    sum / outcome.matched.len() as f64
}

/// Losses of both branches for a frozen pair of matchings.
pub fn losses_for(
    one2one: &MatchOutcome,
    one2many: &MatchOutcome,
    gts: &[LabeledPoint],
    preds: &[PredictedPoint],
    config: &MatchConfig,
) -> Result<LossBreakdown> {
    Ok(LossBreakdown::combine(
        classification_loss(one2one, gts, preds, &config.class_weights)?,
        regression_loss(one2one, gts, preds),
        classification_loss(one2many, gts, preds, &config.class_weights)?,
        regression_loss(one2many, gts, preds),
        config,
    ))
}

/// Runs the hybrid matcher and evaluates the combined loss.
pub fn combined_loss(
    gts: &[LabeledPoint],
    preds: &[PredictedPoint],
    config: &MatchConfig,
) -> Result<LossBreakdown> {
    config.validate()?;
    let (one2one, one2many) = match_hybrid(gts, preds, config)?;
    losses_for(&one2one, &one2many, gts, preds, config)
}
