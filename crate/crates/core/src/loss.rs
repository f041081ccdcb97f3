//! Per-query losses over the full entity score vector.
//!
//! All losses average over the `|E|` entities of one `(head, rel)` query and
//! return the gradient with respect to the logits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Binary cross-entropy on hard 0/1 targets.
    Bce,
    /// Binary cross-entropy on targets smoothed to `α/2` and `1 − α/2`.
    LabelSmoothing,
    /// Label relaxation against the credal set `{p : p(observed) ≥ 1 − α}`.
    LabelRelaxation,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Bce, LossKind::LabelSmoothing, LossKind::LabelRelaxation];

    /// Short flag name: `bce`, `ls` or `lr`.
    pub fn flag(self) -> &'static str {
        match self {
            LossKind::Bce => "bce",
            LossKind::LabelSmoothing => "ls",
            LossKind::LabelRelaxation => "lr",
        }
    }

    pub fn from_flag(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.flag() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Ignored for [`LossKind::Bce`].
    pub alpha: f64,
}

impl LossSpec {
    pub const BCE: LossSpec = LossSpec {
        kind: LossKind::Bce,
        alpha: 0.0,
    };

    pub fn new(kind: LossKind, alpha: f64) -> Result<Self> {
        let spec = Self { kind, alpha };
        spec.validate()?;
        Ok(spec)
    }

    pub fn label_smoothing(alpha: f64) -> Result<Self> {
        Self::new(LossKind::LabelSmoothing, alpha)
    }

    pub fn label_relaxation(alpha: f64) -> Result<Self> {
        Self::new(LossKind::LabelRelaxation, alpha)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            LossKind::Bce => true,
            LossKind::LabelSmoothing => self.alpha > 0.0 && self.alpha < 1.0,
            LossKind::LabelRelaxation => self.alpha > 0.0 && self.alpha <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "alpha {} out of range for {} loss",
                self.alpha,
                self.kind.flag()
            )))
        }
    }

    /// Target values `(positive, negative)` fed to the loss for a 1vsAll row.
    pub fn target_values(&self) -> (f64, f64) {
        match self.kind {
            LossKind::LabelSmoothing => (1.0 - self.alpha / 2.0, self.alpha / 2.0),
            LossKind::Bce | LossKind::LabelRelaxation => (1.0, 0.0),
        }
    }

    /// Loss and logit gradient for one row. For label smoothing `targets`
    /// must already be smoothed (see [`LossSpec::target_values`]).
    pub fn evaluate(&self, logits: &[f64], targets: &[f64], grad: &mut [f64]) -> Result<f64> {
        match self.kind {
            LossKind::Bce | LossKind::LabelSmoothing => bce_into(logits, targets, grad),
            LossKind::LabelRelaxation => label_relaxation_into(logits, targets, self.alpha, grad),
        }
    }
}

impl std::fmt::Display for LossSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            LossKind::Bce => write!(f, "bce"),
            kind => write!(f, "{}(alpha={})", kind.flag(), self.alpha),
        }
    }
}

/// `ln σ(z)` without overflow.
pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy over entities.
pub fn bce(logits: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; logits.len()];
    let loss = bce_into(logits, targets, &mut grad)?;
    Ok((loss, grad))
}

pub(crate) fn bce_into(logits: &[f64], targets: &[f64], grad: &mut [f64]) -> Result<f64> {
    check_lengths(logits, targets, grad)?;
    let n = logits.len() as f64;
    let mut total = 0.0;
    for ((&z, &y), g) in logits.iter().zip(targets).zip(grad.iter_mut()) {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::InvalidArgument(format!("target {y} outside [0, 1]")));
        }
        // -(y ln σ(z) + (1-y) ln σ(-z)) = max(z,0) - z·y + ln(1 + e^{-|z|})
        total += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        *g = (sigmoid(z) - y) / n;
    }
    Ok(total / n)
}

/// Maps hard 0/1 targets to `α/2` and `1 − α/2`.
pub fn smooth_targets(targets: &[f64], alpha: f64) -> Vec<f64> {
    targets
        .iter()
        .map(|&y| if y >= 0.5 { 1.0 - alpha / 2.0 } else { alpha / 2.0 })
        .collect()
}

/// Mean label-relaxation loss over entities, each treated as a binary event.
pub fn label_relaxation(logits: &[f64], targets: &[f64], alpha: f64) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; logits.len()];
    let loss = label_relaxation_into(logits, targets, alpha, &mut grad)?;
    Ok((loss, grad))
}

pub(crate) fn label_relaxation_into(logits: &[f64], targets: &[f64], alpha: f64, grad: &mut [f64]) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "label relaxation needs alpha in (0, 1], got {alpha}"
        )));
    }
    check_lengths(logits, targets, grad)?;
    let n = logits.len() as f64;
    let keep = 1.0 - alpha;
    let mut total = 0.0;
    for ((&z, &y), g) in logits.iter().zip(targets).zip(grad.iter_mut()) {
        let positive = match y {
            1.0 => true,
            0.0 => false,
            y => {
                return Err(Error::InvalidArgument(format!(
                    "label relaxation needs binary targets, got {y}"
                )))
            }
        };
        // Logit of the observed event.
        let zo = if positive { z } else { -z };
        let p_observed = sigmoid(zo);
        if p_observed >= keep {
            *g = 0.0;
            continue;
        }
        // KL((1-α, α) ‖ (p_o, 1-p_o)); the α·ln α term vanishes as α → 0.
        let mut kl = -keep * log_sigmoid(zo) - alpha * log_sigmoid(-zo);
        if keep > 0.0 {
            kl += keep * keep.ln();
        }
        kl += alpha * alpha.ln();
        total += kl;
        // d/dz of the KL is (p_o - (1-α)) on the observed side.
        let d = p_observed - keep;
        *g = if positive { d } else { -d } / n;
    }
    Ok(total / n)
}

fn check_lengths(logits: &[f64], targets: &[f64], grad: &[f64]) -> Result<()> {
    if logits.len() != targets.len() || logits.len() != grad.len() {
        return Err(Error::Shape(format!(
            "loss: {} logits, {} targets, {} gradient slots",
            logits.len(),
            targets.len(),
            grad.len()
        )));
    }
    Ok(())
}
