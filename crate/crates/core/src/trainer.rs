//! Joint mini-batch training of the autoencoder under the combined angular +
//! reconstruction objective, with early stopping, plus extraction of the
//! final unit-sphere embedding.
//!
//! An epoch is one pass over the shuffled constraint set in batches of
//! `constraint_batch`, each paired with a batch of instance rows for the
//! reconstruction term (sizes tied together so both streams finish an epoch
//! at roughly the same rate). Gradients flow through the guarded latent
//! normalization into both halves of the network and are applied with Adam.
//! Epoch-level losses are always full-batch evaluations, so reports are
//! deterministic and comparable across batch settings.

use crate::constraints::{Constraint, ConstraintSet};
use crate::error::{Error, Result};
use crate::loss::{angular_loss, angular_loss_terms, recon_loss, total_loss, LossConfig};
use crate::net::{
    adam_step, backward_stack, forward_stack, normalize_rows_backward, normalize_rows_guarded,
    AutoencoderModel, ModelGrads, OptimizerState,
};
use crate::stream::{content_hash, substream};
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::Path;

/// Negative-zone factor: a fixed value, or `auto` for the safe default of 2
/// (the supremum of minimal admissible factors, valid whenever the embedding
/// dimension is at least the cluster count).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OmegaSpec {
    Auto,
    #[serde(untagged)]
    Fixed(f64),
}

/// Instance-batch size: explicit, or `auto` for the coupled size that paces
/// instances and constraints through an epoch together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchSpec {
    Auto,
    #[serde(untagged)]
    Fixed(usize),
}

/// Early-stopping rule: after `warmup_epochs`, stop once the relative change
/// of the (full-batch) total loss stays below `rel_tol` for `patience`
/// consecutive epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopConfig {
    pub warmup_epochs: usize,
    pub rel_tol: f64,
    pub patience: usize,
}

/// Everything a training run depends on. Hash it (see
/// [`TrainConfig::content_hash`]) to fingerprint checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs_max: usize,
    pub constraint_batch: usize,
    pub instance_batch: BatchSpec,
    pub lr: f64,
    pub lambda: f64,
    pub omega: OmegaSpec,
    pub embed_dim: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
    pub early_stop: EarlyStopConfig,
}

impl Default for TrainConfig {
    /// Reference-scale defaults: 300 epochs, constraint batches of 256,
    /// coupled instance batches, Adam at 1e-3, lambda 0.02, omega auto (2).
    fn default() -> Self {
        Self {
            epochs_max: 300,
            constraint_batch: 256,
            instance_batch: BatchSpec::Auto,
            lr: 1e-3,
            lambda: 0.02,
            omega: OmegaSpec::Auto,
            embed_dim: 10,
            hidden: vec![64, 64, 256],
            seed: 0,
            early_stop: EarlyStopConfig { warmup_epochs: 100, rel_tol: 0.1, patience: 5 },
        }
    }
}

impl TrainConfig {
    /// Desk-scale profile for tests and small experiments: smaller warmup,
    /// tighter stopping tolerance, slightly hotter learning rate, leaner
    /// hidden stack. Converges in seconds on a few hundred points.
    pub fn desk() -> Self {
        Self {
            lr: 5e-3,
            hidden: vec![32, 32],
            early_stop: EarlyStopConfig { warmup_epochs: 20, rel_tol: 1e-3, patience: 5 },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs_max < 1 {
            return Err(Error::InvalidParameter { what: "epochs_max must be >= 1".into() });
        }
        if self.constraint_batch < 1 {
            return Err(Error::InvalidParameter { what: "constraint_batch must be >= 1".into() });
        }
        if let BatchSpec::Fixed(b) = self.instance_batch {
            if b < 1 {
                return Err(Error::InvalidParameter { what: "instance_batch must be >= 1".into() });
            }
        }
        if !(self.lr > 0.0) {
            return Err(Error::InvalidParameter { what: format!("lr must be > 0, got {}", self.lr) });
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidParameter { what: format!("lambda must be >= 0, got {}", self.lambda) });
        }
        if let OmegaSpec::Fixed(w) = self.omega {
            if !(w > 0.0) {
                return Err(Error::InvalidParameter { what: format!("omega must be > 0, got {w}") });
            }
        }
        if self.embed_dim < 1 {
            return Err(Error::InvalidParameter { what: "embed_dim must be >= 1".into() });
        }
        if self.early_stop.patience < 1 {
            return Err(Error::InvalidParameter { what: "patience must be >= 1".into() });
        }
        if !(self.early_stop.rel_tol > 0.0) {
            return Err(Error::InvalidParameter { what: "rel_tol must be > 0".into() });
        }
        Ok(())
    }

    /// The factor actually used: `auto` resolves to 2.
    pub fn resolved_omega(&self) -> f64 {
        match self.omega {
            OmegaSpec::Auto => 2.0,
            OmegaSpec::Fixed(w) => w,
        }
    }

    fn loss_config(&self) -> LossConfig {
        LossConfig { omega: self.resolved_omega(), lambda: self.lambda, ..LossConfig::default() }
    }

    /// Stable fingerprint of the full configuration.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        content_hash(json.as_bytes())
    }
}

/// Coupled instance-batch size `ceil(n_instances * constraint_batch /
/// n_constraints)`, clamped to `[1, n_instances]`: both streams complete an
/// epoch in about the same number of steps.
pub fn auto_instance_batch(n_instances: usize, n_constraints: usize, constraint_batch: usize) -> usize {
    let raw = (n_instances as f64 * constraint_batch as f64 / n_constraints as f64).ceil() as usize;
    raw.clamp(1, n_instances)
}

/// Full-batch losses at one epoch boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub l_ang: f64,
    pub l_recon: f64,
    pub l_total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStop,
}

/// Per-epoch loss trace and how the run ended. Wall time is kept in memory
/// for logging but excluded from serialization so that reports are
/// byte-identical across re-runs; timestamps belong in run manifests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub stop_reason: StopReason,
    pub final_epoch: usize,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl TrainReport {
    /// Final full-batch angular loss — the residual `epsilon` that the
    /// angular deviation bounds consume.
    pub fn final_l_ang(&self) -> f64 {
        self.epochs.last().map(|e| e.l_ang).unwrap_or(f64::NAN)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    /// Plot-ready per-epoch trace.
    pub fn save_loss_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "epoch,l_ang,l_recon,l_total")?;
        for e in &self.epochs {
            writeln!(f, "{},{},{},{}", e.epoch, e.l_ang, e.l_recon, e.l_total)?;
        }
        f.flush()?;
        Ok(())
    }
}

/// Mean angular loss over `batch` plus `lambda` times mean reconstruction
/// loss over `instance_ids`, with gradients for every model parameter.
/// Constraint endpoints and instance rows are gathered into one forward pass;
/// only the gathered rows are encoded.
fn loss_and_grad_indexed(
    model: &AutoencoderModel,
    x: &Array2<f64>,
    batch: &[Constraint],
    instance_ids: &[usize],
    cfg: &LossConfig,
) -> Result<(f64, f64, ModelGrads)> {
    // Gather the union of rows this step touches, remembering local slots.
    let mut unique: Vec<usize> = batch
        .iter()
        .flat_map(|c| [c.a, c.b])
        .chain(instance_ids.iter().copied())
        .collect();
    unique.sort_unstable();
    unique.dedup();
    let local = |gid: usize| unique.binary_search(&gid).expect("gathered above");

    let x_sub = x.select(Axis(0), &unique);
    let enc = forward_stack(&model.encoder, &x_sub);
    let z = &enc.out;

    // Angular term over the reindexed batch.
    let reindexed: Vec<Constraint> =
        batch.iter().map(|c| Constraint { a: local(c.a), b: local(c.b), y: c.y }).collect();
    let (ang_sum, mut d_z) = angular_loss_terms(z, &reindexed, cfg)?;
    let m = batch.len() as f64;
    let l_ang = ang_sum / m;
    d_z.mapv_inplace(|v| v / m);

    // Reconstruction term over the instance rows, through the guarded
    // normalization and the decoder.
    let inst_local: Vec<usize> = instance_ids.iter().map(|&g| local(g)).collect();
    let z_inst = z.select(Axis(0), &inst_local);
    let x_inst = x_sub.select(Axis(0), &inst_local);
    let (u, norms) = normalize_rows_guarded(&z_inst);
    let dec = forward_stack(&model.decoder, &u);
    let (l_recon, mut d_xhat) = recon_loss(&x_inst, &dec.out)?;
    d_xhat.mapv_inplace(|v| v * cfg.lambda);
    let (dec_grads, d_u) = backward_stack(&model.decoder, &dec, &d_xhat);
    let d_z_inst = normalize_rows_backward(&z_inst, &norms, &d_u);
    for (row, &l) in inst_local.iter().enumerate() {
        for j in 0..d_z.ncols() {
            d_z[[l, j]] += d_z_inst[[row, j]];
        }
    }

    let (enc_grads, _) = backward_stack(&model.encoder, &enc, &d_z);
    Ok((l_ang, l_recon, ModelGrads { encoder: enc_grads, decoder: dec_grads }))
}

/// Combined objective over the *full* data and constraint set, with full
/// parameter gradients — the analytic side of end-to-end finite-difference
/// verification, and exactly what the mini-batch steps approximate.
pub fn full_loss_and_grad(
    model: &AutoencoderModel,
    x: &Array2<f64>,
    cs: &ConstraintSet,
    cfg: &LossConfig,
) -> Result<(f64, ModelGrads)> {
    if cs.is_empty() {
        return Err(Error::EmptyInput { what: "constraint set" });
    }
    let all: Vec<usize> = (0..x.nrows()).collect();
    let (l_ang, l_recon, grads) = loss_and_grad_indexed(model, x, cs.items(), &all, cfg)?;
    Ok((total_loss(l_ang, l_recon, cfg.lambda), grads))
}

/// Full-batch evaluation of both loss terms at the current parameters,
/// matching the training objective (guarded normalization before decoding).
pub fn evaluate(
    model: &AutoencoderModel,
    x: &Array2<f64>,
    cs: &ConstraintSet,
    cfg: &LossConfig,
) -> Result<(f64, f64)> {
    let z = model.encode(x)?;
    let (l_ang, _) = angular_loss(&z, cs, cfg)?;
    let (u, _) = normalize_rows_guarded(&z);
    let x_hat = model.decode(&u)?;
    let (l_recon, _) = recon_loss(x, &x_hat)?;
    Ok((l_ang, l_recon))
}

/// Trains a fresh model on `x` under `cs`. Returns the model and the
/// per-epoch loss trace. Deterministic in `cfg.seed`.
pub fn train(x: &Array2<f64>, cs: &ConstraintSet, cfg: &TrainConfig) -> Result<(AutoencoderModel, TrainReport)> {
    cfg.validate()?;
    if cs.is_empty() {
        return Err(Error::EmptyInput { what: "constraint set" });
    }
    if cs.n_instances() != x.nrows() {
        return Err(Error::ShapeMismatch {
            context: format!("data has {} rows, constraint set indexes {}", x.nrows(), cs.n_instances()),
        });
    }
    let started = std::time::Instant::now();
    let n = x.nrows();
    let loss_cfg = cfg.loss_config();
    let bc = cfg.constraint_batch.min(cs.len());
    let bx = match cfg.instance_batch {
        BatchSpec::Auto => auto_instance_batch(n, cs.len(), bc),
        BatchSpec::Fixed(b) => b.min(n),
    };

    let mut model = AutoencoderModel::new(x.ncols(), &cfg.hidden, cfg.embed_dim, cfg.seed)?;
    let mut opt = OptimizerState::new(&model, cfg.lr);
    let mut rng = substream(cfg.seed, "train/shuffle");

    let mut constraint_order: Vec<usize> = (0..cs.len()).collect();
    let mut instance_order: Vec<usize> = (0..n).collect();
    instance_order.shuffle(&mut rng);
    let mut cursor = 0usize;

    let mut epochs = Vec::with_capacity(cfg.epochs_max);
    let mut calm_streak = 0usize;
    let mut stop_reason = StopReason::MaxEpochs;
    let mut final_epoch = cfg.epochs_max;

    for epoch in 1..=cfg.epochs_max {
        constraint_order.shuffle(&mut rng);
        for chunk in constraint_order.chunks(bc) {
            let batch: Vec<Constraint> = chunk.iter().map(|&i| cs.items()[i]).collect();
            // Next `bx` instances, reshuffling at each wrap.
            let mut inst = Vec::with_capacity(bx);
            for _ in 0..bx {
                if cursor == n {
                    instance_order.shuffle(&mut rng);
                    cursor = 0;
                }
                inst.push(instance_order[cursor]);
                cursor += 1;
            }
            let (_, _, grads) = loss_and_grad_indexed(&model, x, &batch, &inst, &loss_cfg)?;
            adam_step(&mut opt, &mut model, &grads)?;
        }

        let (l_ang, l_recon) = evaluate(&model, x, cs, &loss_cfg)?;
        let l_total = total_loss(l_ang, l_recon, cfg.lambda);
        if !l_total.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        epochs.push(EpochStats { epoch, l_ang, l_recon, l_total });

        if epoch > cfg.early_stop.warmup_epochs && epochs.len() >= 2 {
            let prev = epochs[epochs.len() - 2].l_total;
            let rel = (l_total - prev).abs() / prev.abs().max(1e-12);
            if rel < cfg.early_stop.rel_tol {
                calm_streak += 1;
            } else {
                calm_streak = 0;
            }
            if calm_streak >= cfg.early_stop.patience {
                stop_reason = StopReason::EarlyStop;
                final_epoch = epoch;
                break;
            }
        }
        final_epoch = epoch;
    }

    let report = TrainReport {
        epochs,
        stop_reason,
        final_epoch,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok((model, report))
}

/// Row-normalized encoder outputs: the embedding all clustering and
/// cluster-count inference operates on. Errors if any latent row has zero
/// norm (a sign the model collapsed).
pub fn extract_sphere_embedding(model: &AutoencoderModel, x: &Array2<f64>) -> Result<Array2<f64>> {
    let z = model.encode(x)?;
    crate::geometry::normalize_rows(&z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::sample_balanced;
    use crate::data::{gen_gaussian_mixture, ClusterSizes};
    use crate::geometry::{angle_between, minimal_admissible_omega};

    fn exhaustive_constraints(labels: &[usize]) -> ConstraintSet {
        let n = labels.len();
        let items: Vec<Constraint> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .map(|(a, b)| Constraint { a, b, y: u8::from(labels[a] == labels[b]) })
            .collect();
        ConstraintSet::new(items, n).unwrap()
    }

    /// K clusters with means on a circle of radius `separation` in the plane
    /// (the simplex-mean generator cannot place more than 3 clusters in 2-D).
    fn planar_mixture(k: usize, per_cluster: usize, separation: f64, spread: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = substream(seed, "trainer-tests/planar");
        let mut x = Array2::zeros((k * per_cluster, 2));
        let mut labels = Vec::with_capacity(k * per_cluster);
        for c in 0..k {
            let phi = 2.0 * std::f64::consts::PI * c as f64 / k as f64;
            let (my, mx) = phi.sin_cos();
            for i in 0..per_cluster {
                let row = c * per_cluster + i;
                let gx: f64 = StandardNormal.sample(&mut rng);
                let gy: f64 = StandardNormal.sample(&mut rng);
                x[[row, 0]] = separation * mx + spread * gx;
                x[[row, 1]] = separation * my + spread * gy;
                labels.push(c);
            }
        }
        (x, labels)
    }

    #[test]
    fn auto_batch_formula() {
        assert_eq!(auto_instance_batch(60_000, 10_000, 256), 1536);
        assert_eq!(auto_instance_batch(100, 100, 100), 100);
        assert_eq!(auto_instance_batch(10, 10_000, 256), 1);
    }

    #[test]
    fn config_validation_and_hash() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { embed_dim: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { lr: 0.0, ..TrainConfig::default() }.validate().is_err());
        assert!(
            TrainConfig { omega: OmegaSpec::Fixed(-1.0), ..TrainConfig::default() }
                .validate()
                .is_err()
        );
        let a = TrainConfig::default().content_hash();
        let b = TrainConfig::default().content_hash();
        assert_eq!(a, b);
        let c = TrainConfig { seed: 1, ..TrainConfig::default() }.content_hash();
        assert_ne!(a, c);
    }

    #[test]
    fn omega_and_batch_specs_serialize_as_auto_or_value() {
        let cfg = TrainConfig::default();
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"omega\":\"auto\""));
        assert!(json.contains("\"instance_batch\":\"auto\""));
        let cfg2 = TrainConfig {
            omega: OmegaSpec::Fixed(1.5),
            instance_batch: BatchSpec::Fixed(32),
            ..TrainConfig::default()
        };
        let json2 = serde_json::to_string(&cfg2).unwrap();
        assert!(json2.contains("\"omega\":1.5"));
        assert!(json2.contains("\"instance_batch\":32"));
        let back: TrainConfig = serde_json::from_str(&json2).unwrap();
        assert_eq!(back, cfg2);
        let back2: TrainConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back2, cfg);
    }

    #[test]
    fn train_rejects_empty_constraints() {
        let x = Array2::zeros((4, 2));
        let cs = ConstraintSet::new(vec![], 4).unwrap();
        assert!(matches!(
            train(&x, &cs, &TrainConfig::desk()),
            Err(Error::EmptyInput { .. })
        ));
    }

    #[test]
    fn training_is_reproducible() {
        let ds = gen_gaussian_mixture(3, &ClusterSizes::PerCluster(8), 4, 6.0, 0.5, 1).unwrap();
        let cs = sample_balanced(ds.labels.as_ref().unwrap(), 120, 2).unwrap();
        let cfg = TrainConfig {
            epochs_max: 25,
            hidden: vec![16, 16],
            embed_dim: 3,
            ..TrainConfig::desk()
        };
        let (_, r1) = train(&ds.x, &cs, &cfg).unwrap();
        let (_, r2) = train(&ds.x, &cs, &cfg).unwrap();
        assert_eq!(r1.epochs.len(), r2.epochs.len());
        for (a, b) in r1.epochs.iter().zip(&r2.epochs) {
            assert!((a.l_total - b.l_total).abs() < 1e-10);
            assert!((a.l_ang - b.l_ang).abs() < 1e-10);
        }
    }

    #[test]
    fn converges_on_planar_four_cluster_mixture() {
        // 60 points in the plane, 4 clusters, every pair constrained; with
        // embedding dimension 8 >= K a conflict-free configuration exists and
        // training should essentially reach it.
        let (x, labels) = planar_mixture(4, 15, 10.0, 0.7, 3);
        let cs = exhaustive_constraints(&labels);
        let cfg = TrainConfig { embed_dim: 8, ..TrainConfig::desk() };
        let (_, report) = train(&x, &cs, &cfg).unwrap();
        let final_ang = report.final_l_ang();
        assert!(final_ang <= 1e-3, "final angular loss {final_ang}");
        assert!(report.epochs.iter().all(|e| e.l_total.is_finite()));
    }

    #[test]
    fn lambda_zero_reaches_lower_angular_loss_than_heavy_lambda() {
        let ds = gen_gaussian_mixture(3, &ClusterSizes::PerCluster(12), 3, 8.0, 0.8, 5).unwrap();
        let cs = exhaustive_constraints(ds.labels.as_ref().unwrap());
        let base = TrainConfig { embed_dim: 4, epochs_max: 120, ..TrainConfig::desk() };
        let free = TrainConfig { lambda: 0.0, ..base.clone() };
        let tied = TrainConfig { lambda: 1.0, ..base };
        let (_, r_free) = train(&ds.x, &cs, &free).unwrap();
        let (_, r_tied) = train(&ds.x, &cs, &tied).unwrap();
        assert!(
            r_free.final_l_ang() < r_tied.final_l_ang(),
            "lambda=0 angular {} not below lambda=1 angular {}",
            r_free.final_l_ang(),
            r_tied.final_l_ang()
        );
    }

    #[test]
    fn insufficient_dimension_leaves_residual_loss() {
        // With K = 4 clusters and the factor set to the minimal admissible
        // value, cross pairs need angle arccos(-1/3) ~ 109.5 degrees; four
        // directions that far apart do not fit in the plane, so D = 2 keeps
        // the loss away from zero while D = 4 drives it to ~0.
        let k = 4;
        let ds = gen_gaussian_mixture(k, &ClusterSizes::PerCluster(10), 3, 10.0, 0.5, 7).unwrap();
        let cs = exhaustive_constraints(ds.labels.as_ref().unwrap());
        let omega = OmegaSpec::Fixed(minimal_admissible_omega(k).unwrap());
        let cramped = TrainConfig { embed_dim: k - 2, omega, ..TrainConfig::desk() };
        let roomy = TrainConfig { embed_dim: k, omega, ..TrainConfig::desk() };
        let (_, r_cramped) = train(&ds.x, &cs, &cramped).unwrap();
        let (_, r_roomy) = train(&ds.x, &cs, &roomy).unwrap();
        let (lo, hi) = (r_roomy.final_l_ang(), r_cramped.final_l_ang());
        assert!(
            hi >= 10.0 * lo.max(1e-9),
            "cramped residual {hi} not >= 10x roomy residual {lo}"
        );
    }

    #[test]
    fn loss_decreases_on_average_after_warmup() {
        // Run a dimension-starved configuration whose angular loss is bounded
        // away from zero: descent toward the positive floor is steady, so the
        // 10-epoch moving average must be non-increasing (5% slack) once past
        // warmup. (Runs that reach ~0 make relative comparisons meaningless.)
        let ds = gen_gaussian_mixture(4, &ClusterSizes::PerCluster(10), 3, 8.0, 0.6, 11).unwrap();
        let cs = exhaustive_constraints(ds.labels.as_ref().unwrap());
        let cfg = TrainConfig {
            embed_dim: 2,
            omega: OmegaSpec::Fixed(minimal_admissible_omega(4).unwrap()),
            epochs_max: 80,
            ..TrainConfig::desk()
        };
        let (_, report) = train(&ds.x, &cs, &cfg).unwrap();
        let ang: Vec<f64> = report.epochs.iter().map(|e| e.l_ang).collect();
        let warmup = cfg.early_stop.warmup_epochs;
        assert!(ang.len() > warmup + 11, "run stopped too early to observe windows");
        let window = |t: usize| ang[t..t + 10].iter().sum::<f64>() / 10.0;
        for t in warmup..ang.len() - 10 {
            assert!(
                window(t) <= window(t - 1) * 1.05,
                "10-epoch average rose at epoch {t}: {} -> {}",
                window(t - 1),
                window(t)
            );
        }
    }

    #[test]
    fn deviation_bounds_hold_at_convergence() {
        // Train to low residual, then check every constrained pair against
        // the angular slack implied by that residual.
        let ds = gen_gaussian_mixture(3, &ClusterSizes::PerCluster(10), 3, 10.0, 0.4, 13).unwrap();
        let cs = exhaustive_constraints(ds.labels.as_ref().unwrap());
        let cfg = TrainConfig { embed_dim: 4, ..TrainConfig::desk() };
        let (model, report) = train(&ds.x, &cs, &cfg).unwrap();
        let eps = report.final_l_ang();
        let omega = cfg.resolved_omega();
        let (d_plus, d_minus) = crate::geometry::deviation_bounds(cs.len(), eps, omega);
        let z = extract_sphere_embedding(&model, &ds.x).unwrap();
        for c in cs.items() {
            let theta = angle_between(
                z.row(c.a).as_slice().unwrap(),
                z.row(c.b).as_slice().unwrap(),
            )
            .unwrap();
            if c.y == 1 {
                assert!(theta <= d_plus + 1e-9, "positive pair at {theta} > bound {d_plus}");
            } else {
                let floor = std::f64::consts::PI / omega - d_minus;
                assert!(theta >= floor - 1e-9, "negative pair at {theta} < floor {floor}");
            }
        }
    }

    #[test]
    fn sphere_embedding_rows_are_unit_and_deterministic() {
        let ds = gen_gaussian_mixture(3, &ClusterSizes::PerCluster(6), 3, 6.0, 0.5, 17).unwrap();
        let model = AutoencoderModel::new(3, &[16], 4, 3).unwrap();
        let z1 = extract_sphere_embedding(&model, &ds.x).unwrap();
        let z2 = extract_sphere_embedding(&model, &ds.x).unwrap();
        assert_eq!(z1, z2);
        for row in z1.rows() {
            let n: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn converged_three_clusters_form_simplex_directions() {
        // K = 3 at the unique-regime factor 1.5: zero loss forces cross
        // angles of exactly 2*pi/3, so cluster mean directions must approach
        // the planar simplex no matter the embedding dimension.
        let ds = gen_gaussian_mixture(3, &ClusterSizes::PerCluster(15), 3, 10.0, 0.5, 19).unwrap();
        let cs = exhaustive_constraints(ds.labels.as_ref().unwrap());
        let cfg = TrainConfig {
            embed_dim: 3,
            omega: OmegaSpec::Fixed(1.5),
            ..TrainConfig::desk()
        };
        let (model, _) = train(&ds.x, &cs, &cfg).unwrap();
        let z = extract_sphere_embedding(&model, &ds.x).unwrap();
        let labels = ds.labels.as_ref().unwrap();
        let mut means = vec![vec![0.0; 3]; 3];
        for (i, &l) in labels.iter().enumerate() {
            for j in 0..3 {
                means[l][j] += z[[i, j]];
            }
        }
        for a in 0..3 {
            for b in a + 1..3 {
                let th = angle_between(&means[a], &means[b]).unwrap();
                assert!(
                    (th - 2.0 * std::f64::consts::PI / 3.0).abs() < 0.05,
                    "clusters {a},{b} at angle {th}"
                );
            }
        }
    }

    #[test]
    fn report_round_trips_and_writes_csv() {
        let report = TrainReport {
            epochs: vec![
                EpochStats { epoch: 1, l_ang: 0.5, l_recon: 2.0, l_total: 0.54 },
                EpochStats { epoch: 2, l_ang: 0.3, l_recon: 1.5, l_total: 0.33 },
            ],
            stop_reason: StopReason::EarlyStop,
            final_epoch: 2,
            wall_time_s: 1.25,
        };
        let dir = tempfile::tempdir().unwrap();
        let jp = dir.path().join("report.json");
        report.save_json(&jp).unwrap();
        let text = std::fs::read_to_string(&jp).unwrap();
        assert!(!text.contains("wall_time"), "wall time must stay out of serialized reports");
        let back: TrainReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.final_epoch, 2);
        assert_eq!(back.epochs.len(), 2);

        let cp = dir.path().join("loss.csv");
        report.save_loss_csv(&cp).unwrap();
        let csv = std::fs::read_to_string(&cp).unwrap();
        assert!(csv.starts_with("epoch,l_ang,l_recon,l_total\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
