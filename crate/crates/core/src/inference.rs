//! Test-time latent optimization against a frozen decoder, and one-step
//! future prediction with the fitted latent.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{apply_flow, sample_points, FlowField, Point3, PointCloud};
use crate::morpher::{backward_latent, forward, MorpherNet};
use crate::rng::{derive_seed, standard_normal_vec};
use crate::training::{flow_chamfer_loss, AdamState};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferConfig {
    pub max_iters: usize,
    pub lr_z: Real,
    /// Relative improvement below which an iteration counts as stalled.
    pub rel_tol: Real,
    /// Consecutive stalled iterations before stopping.
    pub patience: usize,
    /// Points drawn once from each frame; clouds with fewer points are used whole.
    pub n_points: usize,
    pub seed: u64,
}

impl Default for InferConfig {
    fn default() -> Self {
        InferConfig {
            max_iters: 800,
            lr_z: 1e-3,
            rel_tol: 1e-6,
            patience: 20,
            n_points: 2048,
            seed: 0,
        }
    }
}

impl InferConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.patience == 0 || self.n_points == 0 {
            return Err(Error::invalid("max_iters, patience and n_points must be positive"));
        }
        if !(self.lr_z >= 0.0 && self.lr_z.is_finite()) || !(self.rel_tol >= 0.0) {
            return Err(Error::invalid("lr_z and rel_tol must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Latent optimization outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFit {
    /// Lowest-loss iterate.
    pub z: Vec<Real>,
    pub best_loss: Real,
    /// Chamfer loss at every evaluated iterate, in order.
    pub loss_history: Vec<Real>,
    /// The (possibly subsampled) clouds the loss was evaluated on.
    pub source: PointCloud,
    pub target: PointCloud,
}

fn subsample(cloud: &PointCloud, n: usize, seed: u64) -> Result<PointCloud> {
    if cloud.len() <= n {
        Ok(cloud.clone())
    } else {
        sample_points(cloud, n, seed)
    }
}

/// Seeded starting latent for inference.
pub fn inference_initial_latent(config: &InferConfig, latent_dim: usize) -> Vec<Real> {
    standard_normal_vec(derive_seed(config.seed, "infer-latent", 0), latent_dim)
}

/// Minimizes the Chamfer loss of `source + flow(source, z)` against `target`
/// over `z` only, starting from a fresh standard normal draw.
pub fn optimize_latent(
    net: &MorpherNet,
    source: &PointCloud,
    target: &PointCloud,
    config: &InferConfig,
) -> Result<LatentFit> {
    config.validate()?;
    source.require_non_empty("optimize_latent source")?;
    target.require_non_empty("optimize_latent target")?;
    let source = subsample(source, config.n_points, derive_seed(config.seed, "infer-source", 0))?;
    let target = subsample(target, config.n_points, derive_seed(config.seed, "infer-target", 0))?;

    let mut z = inference_initial_latent(config, net.latent_dim());
    let mut adam = AdamState::new(z.len(), config.lr_z);
    let mut best = (Real::INFINITY, z.clone());
    let mut history = Vec::new();
    let mut stalled = 0;
    for _ in 0..config.max_iters {
        let (flow, tape) = forward(net, &source, &z)?;
        let (loss, upstream) = flow_chamfer_loss(&source, &target, &flow)?;
        if !loss.is_finite() {
            return Err(Error::DegenerateInput("latent optimization produced a non-finite loss".into()));
        }
        if let Some(&prev) = history.last() {
            let improvement = (prev - loss) / Real::max(prev, Real::MIN_POSITIVE);
            if improvement < config.rel_tol {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }
        history.push(loss);
        if loss < best.0 {
            best = (loss, z.clone());
        }
        if stalled >= config.patience {
            break;
        }
        let grad = backward_latent(net, &tape, &upstream)?;
        adam.update(&mut z, &grad)?;
    }
    Ok(LatentFit {
        z: best.1,
        best_loss: best.0,
        loss_history: history,
        source,
        target,
    })
}

/// Flow for every point of `cloud` under latent `z`.
pub fn predict_flow(net: &MorpherNet, cloud: &PointCloud, z: &[Real]) -> Result<FlowField> {
    Ok(forward(net, cloud, z)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub src_index: usize,
    pub position: Point3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    pub z_hat: Vec<Real>,
    /// Predicted next frame; point `i` is where point `i` of the newer observed frame moves.
    pub predicted_frame: PointCloud,
    pub correspondence: Vec<Correspondence>,
    pub loss_history: Vec<Real>,
    pub fit_loss: Real,
}

/// Fits `z` on `(previous, current)` and pushes `current` forward with it.
pub fn predict_future(
    net: &MorpherNet,
    previous: &PointCloud,
    current: &PointCloud,
    config: &InferConfig,
) -> Result<PredictionResult> {
    let fit = optimize_latent(net, previous, current, config)?;
    let flow = predict_flow(net, current, &fit.z)?;
    let predicted_frame = apply_flow(current, &flow)?;
    let correspondence = predicted_frame
        .points
        .iter()
        .enumerate()
        .map(|(src_index, &position)| Correspondence { src_index, position })
        .collect();
    Ok(PredictionResult {
        z_hat: fit.z,
        predicted_frame,
        correspondence,
        loss_history: fit.loss_history,
        fit_loss: fit.best_loss,
    })
}

/// Writes `src_index,x,y,z` rows.
pub fn write_correspondence_csv(path: &Path, corr: &[Correspondence]) -> Result<()> {
    let mut s = String::from("src_index,x,y,z\n");
    for c in corr {
        s.push_str(&format!(
            "{},{:.17e},{:.17e},{:.17e}\n",
            c.src_index, c.position.x, c.position.y, c.position.z
        ));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
}
