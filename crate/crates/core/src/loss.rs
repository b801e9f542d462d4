//! The angular pairwise-constraint loss, the reconstruction regularizer, and
//! their weighted sum — values plus hand-derived analytic gradients.
//!
//! The angular loss scores each constrained pair by the angle between its
//! latent rows: must-link pairs want angle 0, cannot-link pairs want at least
//! `pi/omega`, beyond which the loss is exactly flat (zero gradient). All
//! quantities depend only on row *directions*, never norms, which is what
//! ties the training objective to the unit sphere.

use crate::constraints::{Constraint, ConstraintSet};
use crate::error::{Error, Result};
use crate::net::NORM_GUARD;
use ndarray::Array2;

/// Clamp bound for the cosine entering the arccos *gradient*: keeps
/// `1/sqrt(1-c^2)` finite near angle 0 and pi.
const GRAD_COS_CLAMP: f64 = 1.0 - 1e-7;

/// Knobs of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossConfig {
    /// Negative-zone factor: cannot-link pairs stop being penalized once
    /// their angle reaches `pi/omega`.
    pub omega: f64,
    /// Weight of the reconstruction term.
    pub lambda: f64,
    /// Floor inside logarithms; converged configurations hit exact 0/1
    /// similarities, which must not produce infinite loss.
    pub log_eps: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { omega: 2.0, lambda: 0.02, log_eps: 1e-12 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) {
            return Err(Error::InvalidParameter { what: format!("omega must be > 0, got {}", self.omega) });
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidParameter { what: format!("lambda must be >= 0, got {}", self.lambda) });
        }
        if !(self.log_eps > 0.0 && self.log_eps < 1.0) {
            return Err(Error::InvalidParameter { what: format!("log_eps must be in (0, 1), got {}", self.log_eps) });
        }
        Ok(())
    }
}

/// Pairwise similarity from an angle: `(cos theta + 1)/2` for must-link,
/// `(cos(min(omega*theta, pi)) + 1)/2` for cannot-link. Always in `[0, 1]`.
pub fn sim(theta: f64, y: u8, omega: f64) -> Result<f64> {
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::ThetaOutOfRange { theta });
    }
    if y > 1 {
        return Err(Error::InvalidParameter { what: format!("link flag must be 0 or 1, got {y}") });
    }
    if !(omega > 0.0) {
        return Err(Error::InvalidParameter { what: format!("omega must be > 0, got {omega}") });
    }
    let angle = if y == 1 { theta } else { (omega * theta).min(std::f64::consts::PI) };
    Ok((angle.cos() + 1.0) / 2.0)
}

/// Loss and gradient of one constrained pair, as a function of the angle.
/// Returns `(loss, d_loss/d_theta)`. Gradients are zero wherever the
/// log floor is active and on the flat cannot-link branch.
fn pair_loss_grad(theta: f64, y: u8, cfg: &LossConfig) -> (f64, f64) {
    if y == 1 {
        // -log((1 + cos t)/2)
        let s = (1.0 + theta.cos()) / 2.0;
        if s <= cfg.log_eps {
            (-cfg.log_eps.ln(), 0.0)
        } else {
            (-s.ln(), theta.sin() / (1.0 + theta.cos()))
        }
    } else {
        let wt = cfg.omega * theta;
        if wt >= std::f64::consts::PI {
            // Flat negative zone: fully separated, no pull.
            (0.0, 0.0)
        } else {
            // -log((1 - cos(wt))/2)
            let s = (1.0 - wt.cos()) / 2.0;
            if s <= cfg.log_eps {
                (-cfg.log_eps.ln(), 0.0)
            } else {
                (-s.ln(), -cfg.omega * wt.sin() / (1.0 - wt.cos()))
            }
        }
    }
}

/// Sum (not mean) of per-pair angular losses over `items`, plus the gradient
/// of that sum with respect to every row of `z`. Indices in `items` refer to
/// rows of `z` directly, so callers may pass reindexed mini-batches.
pub fn angular_loss_terms(
    z: &Array2<f64>,
    items: &[Constraint],
    cfg: &LossConfig,
) -> Result<(f64, Array2<f64>)> {
    cfg.validate()?;
    if items.is_empty() {
        return Err(Error::EmptyInput { what: "constraints" });
    }
    let n = z.nrows();
    let mut grad = Array2::<f64>::zeros(z.raw_dim());
    let mut total = 0.0;
    for c in items {
        for idx in [c.a, c.b] {
            if idx >= n {
                return Err(Error::IndexOutOfBounds { index: idx, len: n });
            }
        }
        let za = z.row(c.a);
        let zb = z.row(c.b);
        let na = za.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb = zb.iter().map(|v| v * v).sum::<f64>().sqrt();
        if na == 0.0 {
            return Err(Error::DegenerateLatent { row: c.a });
        }
        if nb == 0.0 {
            return Err(Error::DegenerateLatent { row: c.b });
        }
        let ga = na + NORM_GUARD;
        let gb = nb + NORM_GUARD;
        let dot: f64 = za.iter().zip(zb.iter()).map(|(x, y)| x * y).sum();
        let c_raw = dot / (ga * gb);
        let theta = c_raw.clamp(-1.0, 1.0).acos();
        let (value, dl_dtheta) = pair_loss_grad(theta, c.y, cfg);
        total += value;
        if dl_dtheta != 0.0 {
            // d theta / d cos, with the cosine clamped away from +-1 so the
            // derivative stays bounded at the angle extremes.
            let c_g = c_raw.clamp(-GRAD_COS_CLAMP, GRAD_COS_CLAMP);
            let dtheta_dc = -1.0 / (1.0 - c_g * c_g).sqrt();
            let coef = dl_dtheta * dtheta_dc;
            // d cos / d z_a = z_b/(ga*gb) - cos * z_a/(ga*|z_a|); symmetric in b.
            for j in 0..z.ncols() {
                grad[[c.a, j]] += coef * (zb[j] / (ga * gb) - c_raw * za[j] / (ga * na));
                grad[[c.b, j]] += coef * (za[j] / (ga * gb) - c_raw * zb[j] / (gb * nb));
            }
        }
    }
    Ok((total, grad))
}

/// Mean angular loss over a full constraint set, with the gradient of the
/// mean. `z` must hold one row per dataset instance.
pub fn angular_loss(z: &Array2<f64>, cs: &ConstraintSet, cfg: &LossConfig) -> Result<(f64, Array2<f64>)> {
    if z.nrows() != cs.n_instances() {
        return Err(Error::ShapeMismatch {
            context: format!("embedding has {} rows, constraint set indexes {}", z.nrows(), cs.n_instances()),
        });
    }
    if cs.is_empty() {
        return Err(Error::EmptyInput { what: "constraint set" });
    }
    let (sum, mut grad) = angular_loss_terms(z, cs.items(), cfg)?;
    let m = cs.len() as f64;
    grad.mapv_inplace(|v| v / m);
    Ok((sum / m, grad))
}

/// Mean squared reconstruction error and its gradient `2(x_hat - x)/N`.
pub fn recon_loss(x: &Array2<f64>, x_hat: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    if x.dim() != x_hat.dim() {
        return Err(Error::ShapeMismatch {
            context: format!("x is {:?}, x_hat is {:?}", x.dim(), x_hat.dim()),
        });
    }
    let n = x.nrows() as f64;
    let diff = x_hat - x;
    let value = diff.iter().map(|v| v * v).sum::<f64>() / n;
    let grad = diff.mapv(|v| 2.0 * v / n);
    Ok((value, grad))
}

/// Combined objective: `angular + lambda * recon`.
pub fn total_loss(angular: f64, recon: f64, lambda: f64) -> f64 {
    angular + lambda * recon
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::ConstraintSet;
    use crate::geometry::{minimal_admissible_omega, regular_simplex_matrix};
    use crate::stream::substream;
    use ndarray::array;
    use rand::Rng;
    use std::f64::consts::PI;

    #[test]
    fn sim_boundary_values() {
        assert_eq!(sim(0.0, 1, 2.0).unwrap(), 1.0);
        assert!(sim(PI / 2.0, 0, 2.0).unwrap().abs() < 1e-15);
        assert!(sim(PI, 1, 2.0).unwrap().abs() < 1e-15);
        assert!(matches!(sim(-0.1, 1, 2.0), Err(Error::ThetaOutOfRange { .. })));
        assert!(matches!(sim(3.5, 0, 2.0), Err(Error::ThetaOutOfRange { .. })));
    }

    #[test]
    fn sim_is_continuous_and_flat_past_boundary() {
        let omega = 1.7;
        let boundary = PI / omega;
        let before = sim(boundary - 1e-9, 0, omega).unwrap();
        let at = sim(boundary, 0, omega).unwrap();
        assert!((before - at).abs() < 1e-8);
        // Flat zone: constant value 0 for any angle past the boundary.
        for t in [boundary, boundary + 0.1, PI] {
            assert!(sim(t, 0, omega).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn single_positive_pair_at_right_angle_costs_ln2() {
        let z = array![[1.0, 0.0], [0.0, 1.0]];
        let cs = ConstraintSet::new(vec![Constraint { a: 0, b: 1, y: 1 }], 2).unwrap();
        let (v, _) = angular_loss(&z, &cs, &LossConfig::default()).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-12, "loss = {v}");
    }

    #[test]
    fn simplex_with_matched_omega_has_zero_loss() {
        // Points sitting exactly on simplex vertices, cross angles exactly at
        // the negative-zone boundary: every term of the loss vanishes.
        for k in [3usize, 4, 5] {
            let d = k - 1;
            let verts = regular_simplex_matrix(k, d).unwrap();
            let per = 2;
            let n = k * per;
            let mut z = Array2::<f64>::zeros((n, d));
            let mut labels = Vec::new();
            for i in 0..n {
                let c = i / per;
                z.row_mut(i).assign(&verts.row(c));
                labels.push(c);
            }
            let mut items = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    items.push(Constraint { a, b, y: (labels[a] == labels[b]) as u8 });
                }
            }
            let cs = ConstraintSet::new(items, n).unwrap();
            let cfg = LossConfig {
                omega: minimal_admissible_omega(k).unwrap(),
                ..LossConfig::default()
            };
            let (v, grad) = angular_loss(&z, &cs, &cfg).unwrap();
            assert!(v <= 1e-6, "k = {k}: residual loss {v}");
            let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            assert!(gmax < 1e-3, "k = {k}: gradient magnitude {gmax} at optimum");
        }
    }

    #[test]
    fn value_is_invariant_to_row_rescaling() {
        let mut rng = substream(3, "loss/rescale");
        let z = Array2::from_shape_fn((6, 3), |_| rng.random::<f64>() - 0.5);
        let items: Vec<Constraint> = vec![
            Constraint { a: 0, b: 1, y: 1 },
            Constraint { a: 2, b: 3, y: 0 },
            Constraint { a: 4, b: 5, y: 0 },
            Constraint { a: 0, b: 5, y: 1 },
        ];
        let cs = ConstraintSet::new(items, 6).unwrap();
        let cfg = LossConfig::default();
        let (v1, _) = angular_loss(&z, &cs, &cfg).unwrap();
        let mut z2 = z.clone();
        z2.row_mut(0).mapv_inplace(|v| v * 10.0);
        z2.row_mut(3).mapv_inplace(|v| v * 0.03);
        let (v2, _) = angular_loss(&z2, &cs, &cfg).unwrap();
        assert!((v1 - v2).abs() < 1e-9, "{v1} vs {v2}");
    }

    #[test]
    fn separated_negatives_contribute_no_gradient() {
        // Angle 2*pi/3 between the rows; boundary pi/2 at omega = 2.
        let z = array![[1.0, 0.0], [-0.5, 3.0f64.sqrt() / 2.0]];
        let cs = ConstraintSet::new(vec![Constraint { a: 0, b: 1, y: 0 }], 2).unwrap();
        let (v, grad) = angular_loss(&z, &cs, &LossConfig::default()).unwrap();
        assert_eq!(v, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn conflict_free_configuration_is_a_minimum() {
        // Perturbing a zero-loss configuration can only raise the loss.
        let k = 4;
        let verts = regular_simplex_matrix(k, k - 1).unwrap();
        let per = 3;
        let n = k * per;
        let mut z0 = Array2::<f64>::zeros((n, k - 1));
        let mut labels = Vec::new();
        for i in 0..n {
            z0.row_mut(i).assign(&verts.row(i / per));
            labels.push(i / per);
        }
        let mut items = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                items.push(Constraint { a, b, y: (labels[a] == labels[b]) as u8 });
            }
        }
        let cs = ConstraintSet::new(items, n).unwrap();
        let cfg = LossConfig { omega: minimal_admissible_omega(k).unwrap(), ..Default::default() };
        let (v0, _) = angular_loss(&z0, &cs, &cfg).unwrap();
        let mut rng = substream(8, "loss/perturb");
        for _ in 0..20 {
            let mut z = z0.clone();
            for v in z.iter_mut() {
                *v += 0.3 * (rng.random::<f64>() - 0.5);
            }
            let (vp, _) = angular_loss(&z, &cs, &cfg).unwrap();
            assert!(vp >= v0, "perturbation lowered the loss: {vp} < {v0}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = substream(5, "loss/fd");
        let n = 8;
        let d = 3;
        let z0 = Array2::from_shape_fn((n, d), |_| rng.random::<f64>() * 2.0 - 1.0);
        let mut items = Vec::new();
        for a in 0..n {
            for b in (a + 1..n).step_by(2) {
                items.push(Constraint { a, b, y: ((a + b) % 2) as u8 });
            }
        }
        let cs = ConstraintSet::new(items, n).unwrap();
        let cfg = LossConfig { omega: 1.8, ..Default::default() };
        let (_, grad) = angular_loss(&z0, &cs, &cfg).unwrap();
        let mut worst = 0.0f64;
        let h = 1e-6;
        let mut z = z0.clone();
        for i in 0..n {
            for j in 0..d {
                let orig = z[[i, j]];
                z[[i, j]] = orig + h;
                let (fp, _) = angular_loss(&z, &cs, &cfg).unwrap();
                z[[i, j]] = orig - h;
                let (fm, _) = angular_loss(&z, &cs, &cfg).unwrap();
                z[[i, j]] = orig;
                let fd = (fp - fm) / (2.0 * h);
                let an = grad[[i, j]];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                worst = worst.max(rel);
            }
        }
        assert!(worst < 1e-4, "max relative gradient error {worst}");
    }

    #[test]
    fn degenerate_and_empty_inputs_error() {
        let z = array![[0.0, 0.0], [1.0, 0.0]];
        let cs = ConstraintSet::new(vec![Constraint { a: 0, b: 1, y: 1 }], 2).unwrap();
        assert!(matches!(
            angular_loss(&z, &cs, &LossConfig::default()),
            Err(Error::DegenerateLatent { row: 0 })
        ));
        let empty = ConstraintSet::new(vec![], 2).unwrap();
        let z2 = array![[1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(
            angular_loss(&z2, &empty, &LossConfig::default()),
            Err(Error::EmptyInput { .. })
        ));
    }

    #[test]
    fn recon_loss_examples() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let (v, g) = recon_loss(&x, &x).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.iter().all(|&x| x == 0.0));

        // One row at distance 3: squared norm 9.
        let a = array![[0.0, 0.0, 0.0]];
        let b = array![[3.0, 0.0, 0.0]];
        let (v, g) = recon_loss(&a, &b).unwrap();
        assert_eq!(v, 9.0);
        assert_eq!(g[[0, 0]], 6.0); // 2*(3-0)/1

        let bad = array![[1.0]];
        assert!(matches!(recon_loss(&a, &bad), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn recon_loss_matches_direct_recomputation() {
        let mut rng = substream(6, "loss/recon");
        let x = Array2::from_shape_fn((7, 4), |_| rng.random::<f64>());
        let xh = Array2::from_shape_fn((7, 4), |_| rng.random::<f64>());
        let (v, g) = recon_loss(&x, &xh).unwrap();
        let mut direct = 0.0;
        for i in 0..7 {
            for j in 0..4 {
                direct += (x[[i, j]] - xh[[i, j]]).powi(2);
            }
        }
        direct /= 7.0;
        assert!((v - direct).abs() < 1e-12);
        for i in 0..7 {
            for j in 0..4 {
                assert!((g[[i, j]] - 2.0 * (xh[[i, j]] - x[[i, j]]) / 7.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn total_loss_combines_linearly() {
        assert_eq!(total_loss(1.0, 2.0, 0.0), 1.0);
        assert!((total_loss(1.0, 2.0, 0.02) - 1.04).abs() < 1e-15);
        assert_eq!(total_loss(0.0, 0.0, 5.0), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(LossConfig::default().validate().is_ok());
        assert!(LossConfig { omega: 0.0, ..Default::default() }.validate().is_err());
        assert!(LossConfig { lambda: -0.1, ..Default::default() }.validate().is_err());
        assert!(LossConfig { log_eps: 0.0, ..Default::default() }.validate().is_err());
    }
}
