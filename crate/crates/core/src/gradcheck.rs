//! Central finite-difference check of the analytic gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::loss::{sigmoid, LossKind, LossSpec};
use crate::model::{Gradients, Mode, ModelState, Variant};
use crate::rng::{self, Purpose};

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-5;
pub const ABS_FLOOR: f64 = 1e-8;
/// Batch variance below which normalization makes the loss too curved for
/// a central difference at [`STEP`].
pub const VARIANCE_FLOOR: f64 = 1e-3;

/// A random training batch on a small random model.
#[derive(Debug, Clone)]
pub struct Instance {
    pub state: ModelState,
    pub heads: Vec<usize>,
    pub rels: Vec<usize>,
    pub tails: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub dim: usize,
    pub trials: usize,
    pub seed: u64,
    pub num_entities: usize,
    pub num_relations: usize,
    pub batch: usize,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            dim: 4,
            trials: 20,
            seed: 1,
            num_entities: 7,
            num_relations: 3,
            batch: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckResult {
    pub variant: Variant,
    pub loss: LossSpec,
    pub dim: usize,
    pub trials: usize,
    pub max_rel_error: f64,
}

impl GradCheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_error < REL_TOL
    }
}

/// `|a − n| / max(|a|, |n|, ABS_FLOOR / REL_TOL)`: below `REL_TOL` exactly
/// when the relative error is below `REL_TOL` or the absolute error is below
/// `ABS_FLOOR`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ABS_FLOOR / REL_TOL)
}

fn row_targets(loss: &LossSpec, num_entities: usize, tail: usize) -> Vec<f64> {
    let (pos, neg) = loss.target_values();
    let mut t = vec![neg; num_entities];
    t[tail] = pos;
    t
}

/// Summed per-row loss of a train-mode forward pass, and the logit gradient.
fn loss_and_upstream(
    inst: &Instance,
    state: &ModelState,
    loss: &LossSpec,
) -> Result<(f64, Vec<f64>, crate::model::Forward)> {
    let fwd = state.forward(&inst.heads, &inst.rels, Mode::Train);
    let ne = state.num_entities();
    let mut upstream = vec![0.0; inst.heads.len() * ne];
    let mut total = 0.0;
    for (row, &tail) in inst.tails.iter().enumerate() {
        let targets = row_targets(loss, ne, tail);
        total += loss.evaluate(fwd.logits_row(row), &targets, &mut upstream[row * ne..(row + 1) * ne])?;
    }
    Ok((total, upstream, fwd))
}

pub fn total_loss(inst: &Instance, state: &ModelState, loss: &LossSpec) -> Result<f64> {
    Ok(loss_and_upstream(inst, state, loss)?.0)
}

pub fn analytic_gradients(inst: &Instance, loss: &LossSpec) -> Result<Gradients> {
    let (_, upstream, fwd) = loss_and_upstream(inst, &inst.state, loss)?;
    inst.state.backward(&fwd, &upstream)
}

/// Largest relative error between `analytic` and central differences over
/// every trainable parameter.
pub fn compare(inst: &Instance, loss: &LossSpec, analytic: &Gradients) -> Result<f64> {
    let mut probe = inst.state.clone();
    let mut worst: f64 = 0.0;
    let analytic = analytic.slices();
    for (k, grad) in analytic.iter().enumerate() {
        for i in 0..grad.len() {
            let orig = probe.params()[k][i];
            probe.params_mut()[k][i] = orig + STEP;
            let up = total_loss(inst, &probe, loss)?;
            probe.params_mut()[k][i] = orig - STEP;
            let down = total_loss(inst, &probe, loss)?;
            probe.params_mut()[k][i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            worst = worst.max(relative_error(grad[i], numeric));
        }
    }
    Ok(worst)
}

/// True when some label-relaxation entity sits so close to the credal
/// boundary that a finite-difference step could cross the kink.
fn near_kink(inst: &Instance, loss: &LossSpec) -> bool {
    if loss.kind != LossKind::LabelRelaxation {
        return false;
    }
    let fwd = inst.state.forward(&inst.heads, &inst.rels, Mode::Train);
    inst.tails.iter().enumerate().any(|(row, &tail)| {
        fwd.logits_row(row).iter().enumerate().any(|(x, &z)| {
            let p = sigmoid(z);
            let observed = if x == tail { p } else { 1.0 - p };
            (observed - (1.0 - loss.alpha)).abs() < 1e-3
        })
    })
}

/// True when a normalization layer sees a feature with (nearly) constant
/// batch values.
fn ill_conditioned(inst: &Instance) -> bool {
    let fwd = inst.state.forward(&inst.heads, &inst.rels, Mode::Train);
    ModelState::min_batch_variance(&fwd).is_some_and(|v| v < VARIANCE_FLOOR)
}

fn random_instance(variant: Variant, config: &GradCheckConfig, rng: &mut impl Rng) -> Result<Instance> {
    let mut state = ModelState::init(
        variant,
        config.dim,
        config.num_entities,
        config.num_relations,
        rng.gen(),
    )?;
    // Scale up so logits leave the near-zero regime and BN affine terms differ from identity.
    for buf in state.params_mut() {
        for v in buf.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    let n = config.batch;
    Ok(Instance {
        state,
        heads: (0..n).map(|_| rng.gen_range(0..config.num_entities)).collect(),
        rels: (0..n).map(|_| rng.gen_range(0..config.num_relations)).collect(),
        tails: (0..n).map(|_| rng.gen_range(0..config.num_entities)).collect(),
    })
}

/// Runs `config.trials` random instances, drawing a fresh instance whenever
/// the current one lies on a label-relaxation kink or has a near-constant
/// normalized feature. `tamper` may modify the analytic gradients before
/// comparison.
pub fn check_with(
    variant: Variant,
    loss: LossSpec,
    config: &GradCheckConfig,
    mut tamper: impl FnMut(&mut Gradients),
) -> Result<GradCheckResult> {
    let index = (variant as u64) << 8 | (loss.kind as u64) << 4;
    let mut rng = rng::stream(config.seed, Purpose::GradCheck, index ^ (config.dim as u64) << 16);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < config.trials {
        let inst = random_instance(variant, config, &mut rng)?;
        if near_kink(&inst, &loss) || ill_conditioned(&inst) {
            continue;
        }
        let mut grads = analytic_gradients(&inst, &loss)?;
        tamper(&mut grads);
        worst = worst.max(compare(&inst, &loss, &grads)?);
        done += 1;
    }
    Ok(GradCheckResult {
        variant,
        loss,
        dim: config.dim,
        trials: config.trials,
        max_rel_error: worst,
    })
}

pub fn check(variant: Variant, loss: LossSpec, config: &GradCheckConfig) -> Result<GradCheckResult> {
    check_with(variant, loss, config, |_| {})
}

/// The three loss kinds with `alpha` for the calibrated ones.
pub fn losses(alpha: f64) -> Result<Vec<LossSpec>> {
    Ok(vec![
        LossSpec::BCE,
        LossSpec::label_smoothing(alpha)?,
        LossSpec::label_relaxation(alpha)?,
    ])
}
