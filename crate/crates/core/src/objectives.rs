//! Loss stack: symmetric contrastive loss over batch similarities, the
//! Banzhaf-interaction KL loss, self-distillation between levels and the
//! total objective. Every loss has an analytic gradient alongside it.
//!
//! KL terms always put the predicted (or student) distribution first:
//! `KL(pred || target) = sum pred * (log pred - log target)`.
//! Reductions are means over rows, columns and batch items.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::InteractionMap;
use crate::matrix::Matrix;

pub const DEFAULT_TAU: f64 = 0.01;
pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_BETA: f64 = 2.0;

/// `B x B` similarities, `s[k][l]` between video `k` and text `l`, plus the
/// softmax temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSimilarities {
    s: Matrix,
    tau: f64,
}

impl BatchSimilarities {
    pub fn new(s: Matrix, tau: f64) -> Result<Self> {
        if s.rows() != s.cols() || s.rows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "batch similarities must be square and non-empty, got {}x{}",
                s.rows(),
                s.cols()
            )));
        }
        if !s.is_finite() {
            return Err(Error::NonFinite("batch similarity".into()));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "temperature {tau} must be positive"
            )));
        }
        Ok(BatchSimilarities { s, tau })
    }

    pub fn batch_size(&self) -> usize {
        self.s.rows()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn similarities(&self) -> &Matrix {
        &self.s
    }

    fn logits(&self) -> Matrix {
        self.s.map(|v| v / self.tau)
    }
}

/// Predicted fine-grained relationship between frames and words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct RelationshipMap(Matrix);

impl TryFrom<Matrix> for RelationshipMap {
    type Error = Error;

    fn try_from(m: Matrix) -> Result<Self> {
        RelationshipMap::new(m)
    }
}

impl From<RelationshipMap> for Matrix {
    fn from(r: RelationshipMap) -> Matrix {
        r.0
    }
}

impl RelationshipMap {
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::NonFinite("relationship map".into()));
        }
        Ok(RelationshipMap(m))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }
}

fn log_softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    v.iter().map(|x| x - lse).collect()
}

fn log_softmax_rows(m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for r in 0..m.rows() {
        out.row_mut(r).copy_from_slice(&log_softmax(m.row(r)));
    }
    out
}

fn softmax_rows(m: &Matrix) -> Matrix {
    log_softmax_rows(m).map(f64::exp)
}

/// Row-wise (video-to-text) and column-wise (text-to-video) softmax.
pub fn interaction_distributions(map: &Matrix) -> Result<(Matrix, Matrix)> {
    if !map.is_finite() {
        return Err(Error::NonFinite("interaction map".into()));
    }
    let v2t = softmax_rows(map);
    let t2v = softmax_rows(&map.transpose()).transpose();
    Ok((v2t, t2v))
}

/// Mean over rows of `KL(softmax(x_r) || softmax(y_r))` and its gradients.
fn kl_rows(x: &Matrix, y: &Matrix) -> (f64, Matrix, Matrix) {
    let rows = x.rows();
    let mut gx = Matrix::zeros(rows, x.cols());
    let mut gy = Matrix::zeros(rows, x.cols());
    let mut total = 0.0;
    for r in 0..rows {
        let lp = log_softmax(x.row(r));
        let lq = log_softmax(y.row(r));
        let kl: f64 = lp.iter().zip(&lq).map(|(a, b)| a.exp() * (a - b)).sum();
        // non-negative in exact arithmetic
        total += if kl > 0.0 { kl } else { 0.0 };
        for c in 0..x.cols() {
            let p = lp[c].exp();
            let q = lq[c].exp();
            gx.set(r, c, p * (lp[c] - lq[c] - kl) / rows as f64);
            gy.set(r, c, (q - p) / rows as f64);
        }
    }
    (total / rows as f64, gx, gy)
}

/// Row KL plus column KL, both averaged.
fn kl_both_ways(x: &Matrix, y: &Matrix) -> (f64, Matrix, Matrix) {
    let (lr, gxr, gyr) = kl_rows(x, y);
    let (lc, gxc, gyc) = kl_rows(&x.transpose(), &y.transpose());
    let gx = Matrix::from_fn(x.rows(), x.cols(), |r, c| gxr.get(r, c) + gxc.get(c, r));
    let gy = Matrix::from_fn(x.rows(), x.cols(), |r, c| gyr.get(r, c) + gyc.get(c, r));
    (lr + lc, gx, gy)
}

/// Symmetric InfoNCE over the batch.
pub fn contrastive_loss(batch: &BatchSimilarities) -> f64 {
    contrastive_loss_grad(batch).0
}

/// Contrastive loss and its gradient with respect to the similarities.
pub fn contrastive_loss_grad(batch: &BatchSimilarities) -> (f64, Matrix) {
    let b = batch.batch_size();
    let logits = batch.logits();
    let row_ls = log_softmax_rows(&logits);
    let col_ls = log_softmax_rows(&logits.transpose()).transpose();
    let diag: f64 = (0..b).map(|k| row_ls.get(k, k) + col_ls.get(k, k)).sum();
    let loss = -0.5 * diag / b as f64;
    let loss = if loss > 0.0 { loss } else { 0.0 };
    let scale = 1.0 / (2.0 * b as f64 * batch.tau);
    let grad = Matrix::from_fn(b, b, |r, c| {
        let eye = if r == c { 2.0 } else { 0.0 };
        (row_ls.get(r, c).exp() + col_ls.get(r, c).exp() - eye) * scale
    });
    (loss, grad)
}

/// KL between the relationship distributions and the interaction
/// distributions, in both directions of retrieval.
pub fn banzhaf_interaction_loss(r: &RelationshipMap, i: &InteractionMap) -> Result<f64> {
    Ok(banzhaf_interaction_loss_grad(r.matrix(), &i.values)?.loss)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    /// Gradient with respect to the first (predicted/student) argument.
    pub grad_first: Matrix,
    /// Gradient with respect to the second (target/teacher) argument.
    pub grad_second: Matrix,
}

pub fn banzhaf_interaction_loss_grad(r: &Matrix, i: &Matrix) -> Result<LossGrad> {
    r.ensure_same_shape(i, "relationship vs interaction map")?;
    if !r.is_finite() || !i.is_finite() {
        return Err(Error::NonFinite("interaction loss input".into()));
    }
    let (loss, grad_first, grad_second) = kl_both_ways(r, i);
    Ok(LossGrad {
        loss,
        grad_first,
        grad_second,
    })
}

/// `contrastive + alpha * interaction` for a single relationship/interaction pair.
pub fn level_loss(
    batch: &BatchSimilarities,
    r: &RelationshipMap,
    i: &InteractionMap,
    alpha: f64,
) -> Result<f64> {
    check_weight("alpha", alpha)?;
    Ok(contrastive_loss(batch) + alpha * banzhaf_interaction_loss(r, i)?)
}

/// KL from the student level's batch distributions to the teacher's, with
/// both similarity matrices scaled by the shared temperature.
pub fn distillation_loss(student: &BatchSimilarities, teacher: &BatchSimilarities) -> Result<f64> {
    Ok(distillation_loss_grad(student, teacher)?.loss)
}

pub fn distillation_loss_grad(
    student: &BatchSimilarities,
    teacher: &BatchSimilarities,
) -> Result<LossGrad> {
    if student.batch_size() != teacher.batch_size() {
        return Err(Error::DimensionMismatch(format!(
            "student batch {} vs teacher batch {}",
            student.batch_size(),
            teacher.batch_size()
        )));
    }
    if student.tau != teacher.tau {
        return Err(Error::InvalidArgument(format!(
            "student temperature {} differs from teacher temperature {}",
            student.tau, teacher.tau
        )));
    }
    let (loss, gx, gy) = kl_both_ways(&student.logits(), &teacher.logits());
    let inv = 1.0 / student.tau;
    Ok(LossGrad {
        loss,
        grad_first: gx.map(|v| v * inv),
        grad_second: gy.map(|v| v * inv),
    })
}

/// Everything needed to evaluate one semantic level: batch similarities and
/// one relationship/interaction map pair per positive video-text pair.
#[derive(Debug, Clone)]
pub struct LevelInputs {
    pub batch: BatchSimilarities,
    pub maps: Vec<(RelationshipMap, InteractionMap)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelLossBreakdown {
    pub contrastive: f64,
    pub interaction: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Entity, action and event levels, in that order.
    pub levels: Vec<LevelLossBreakdown>,
    pub distill_entity_to_action: f64,
    pub distill_entity_to_event: f64,
    pub total: f64,
    pub alpha: f64,
    pub beta: f64,
}

pub fn evaluate_level(inputs: &LevelInputs, alpha: f64) -> Result<LevelLossBreakdown> {
    check_weight("alpha", alpha)?;
    let contrastive = contrastive_loss(&inputs.batch);
    let interaction = if inputs.maps.is_empty() {
        0.0
    } else {
        let mut sum = 0.0;
        for (r, i) in &inputs.maps {
            sum += banzhaf_interaction_loss(r, i)?;
        }
        sum / inputs.maps.len() as f64
    };
    Ok(LevelLossBreakdown {
        contrastive,
        interaction,
        total: contrastive + alpha * interaction,
    })
}

/// Deep supervision over the three levels plus `beta` times the
/// entity→action and entity→event distillation terms.
pub fn total_loss(levels: &[LevelInputs; 3], alpha: f64, beta: f64) -> Result<LossBreakdown> {
    check_weight("beta", beta)?;
    let per_level = levels
        .iter()
        .map(|l| evaluate_level(l, alpha))
        .collect::<Result<Vec<_>>>()?;
    let e2a = distillation_loss(&levels[1].batch, &levels[0].batch)?;
    let e2o = distillation_loss(&levels[2].batch, &levels[0].batch)?;
    let supervision: f64 = per_level.iter().map(|l| l.total).sum();
    let total = supervision + beta * (e2a + e2o);
    if !total.is_finite() {
        return Err(Error::NonFinite("total loss".into()));
    }
    Ok(LossBreakdown {
        levels: per_level,
        distill_entity_to_action: e2a,
        distill_entity_to_event: e2o,
        total,
        alpha,
        beta,
    })
}

fn check_weight(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "{name} = {v} must be finite and >= 0"
        )));
    }
    Ok(())
}
