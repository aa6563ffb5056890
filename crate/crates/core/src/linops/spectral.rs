//! Power-iteration estimation of the extreme eigenvalues of an SPD
//! operator, used to size gradient steps when no hints are given.

use ndarray::Array1;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::LinearOperator;
use crate::error::{Error, Result};

/// Safety factors: the top estimate is nudged up, the bottom one down, so
/// downstream step sizes stay on the conservative side of the truth.
const LAMBDA_MAX_SAFETY: f64 = 1.02;
const LAMBDA_MIN_SAFETY: f64 = 0.98;
/// Shift multiplier for the deflation pass.
const SHIFT_FACTOR: f64 = 1.05;
/// Relative Rayleigh-quotient stagnation that counts as converged.
const CONVERGENCE_RTOL: f64 = 1e-10;

/// Estimated extreme eigenvalues of an SPD operator.
///
/// `converged` is false when either power iteration failed to stagnate
/// within the budget; the estimates are then best-effort and step-size
/// guarantees derived from them are not certified.
#[derive(Debug, Clone)]
pub struct SpectralEstimate {
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Estimates λ_max(B) by power iteration and λ_min(B) by power iteration
/// on the shifted operator c·I − B with c = 1.05·λ̂_max. Every step costs
/// one application of B, tallied on the operator.
pub fn estimate_extreme_eigs(b: &dyn LinearOperator, iters: usize, seed: u64) -> Result<SpectralEstimate> {
    if iters == 0 {
        return Err(Error::InvalidConfig("estimation needs iters >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (ray_max, conv_max, used_max) = power_rayleigh(b, iters, &mut rng, |bv, _v| bv.clone())?;
    if !(ray_max > 0.0) {
        return Err(Error::NotSpd(format!(
            "top Rayleigh quotient {ray_max:e} is not positive"
        )));
    }
    let lambda_max = ray_max * LAMBDA_MAX_SAFETY;

    let c = SHIFT_FACTOR * lambda_max;
    let (ray_shift, conv_min, used_min) = power_rayleigh(b, iters, &mut rng, |bv, v| {
        let mut w = v * c;
        w -= bv;
        w
    })?;
    let mut lambda_min = (c - ray_shift) * LAMBDA_MIN_SAFETY;
    let mut converged = conv_max && conv_min;
    if !(lambda_min > 0.0 && lambda_min.is_finite()) {
        // Estimation slop crossed zero; keep a usable SPD floor but flag it.
        lambda_min = lambda_max * 1e-16;
        converged = false;
    }

    Ok(SpectralEstimate {
        lambda_max,
        lambda_min,
        converged,
        iterations: used_max.max(used_min),
    })
}

/// Runs power iteration where each step maps v ↦ step(B·v, v); returns the
/// final Rayleigh quotient of the mapped operator, whether it stagnated,
/// and the steps used.
fn power_rayleigh(
    b: &dyn LinearOperator,
    iters: usize,
    rng: &mut ChaCha8Rng,
    step: impl Fn(&Array1<f64>, &Array1<f64>) -> Array1<f64>,
) -> Result<(f64, bool, usize)> {
    let d = b.dim();
    let mut v = Array1::from_shape_fn(d, |_| rng.sample::<f64, _>(StandardNormal));
    let n = v.dot(&v).sqrt();
    if n == 0.0 {
        v[0] = 1.0;
    } else {
        v /= n;
    }

    let mut ray_prev: Option<f64> = None;
    let mut ray = 0.0;
    let mut converged = false;
    let mut used = 0;
    for t in 0..iters {
        let bv = b.apply(v.view())?;
        let w = step(&bv, &v);
        ray = v.dot(&w);
        used = t + 1;
        if let Some(p) = ray_prev {
            if (ray - p).abs() <= CONVERGENCE_RTOL * ray.abs().max(1e-300) {
                converged = true;
                break;
            }
        }
        ray_prev = Some(ray);
        let wn = w.dot(&w).sqrt();
        if wn == 0.0 {
            // The operator annihilates v: Rayleigh quotient is exact.
            converged = true;
            break;
        }
        v = w / wn;
    }
    Ok((ray, converged, used))
}
