//! A posteriori error estimates for the compressed solver.
//!
//! With `q = A⁻¹f` and `q̃ = Ã⁻¹f`,
//! `‖q̃ − q‖ ≤ ‖Ã⁻¹‖ ‖A − Ã‖ ‖q‖`; both norms are estimated by power
//! iteration on the normal operator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hbs::HbsMatrix;
use crate::invert::HbsInverse;
use crate::quadrature::MatrixEntries;

pub const DEFAULT_POWER_ITERS: usize = 50;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Spectral norm estimate from `iters` steps of power iteration on `AᵀA`.
///
/// Returns the largest `‖A x‖` over the unit iterates, which never exceeds
/// the true norm up to rounding and does not decrease with `iters`.
pub fn power_norm<F, G>(
    apply: F,
    apply_adjoint: G,
    dim: usize,
    iters: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
    G: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if iters < 2 {
        return Err(Error::InvalidArgument(format!(
            "power iteration needs at least 2 steps, got {iters}"
        )));
    }
    if dim == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n0 = norm(&x);
    x.iter_mut().for_each(|v| *v /= n0);
    let mut best = 0.0f64;
    for _ in 0..iters {
        let y = apply(&x)?;
        best = best.max(norm(&y));
        let z = apply_adjoint(&y)?;
        let nz = norm(&z);
        if nz == 0.0 || !nz.is_finite() {
            break;
        }
        x = z.into_iter().map(|v| v / nz).collect();
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    #[serde(rename = "err_A")]
    pub err_a: f64,
    pub norm_inv: f64,
    /// `err_A · norm_inv`; multiply by `‖q‖` for an absolute bound.
    pub bound: f64,
}

/// Estimates `‖A − Ã‖`, `‖Ã⁻¹‖` and their product. `exact` supplies matvecs
/// with the uncompressed matrix.
pub fn estimate_solver_error<K: MatrixEntries>(
    exact: &K,
    approx: &HbsMatrix,
    inv: &HbsInverse,
    iters: usize,
    seed: u64,
) -> Result<ErrorEstimate> {
    let n = exact.dim();
    if approx.size() != n || inv.size() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: approx.size(),
        });
    }
    let approx_t = approx.transpose();
    let diff = |x: &[f64], t: bool| -> Result<Vec<f64>> {
        let (a, b) = if t {
            (exact.matvec_transpose(x), approx_t.matvec(x)?)
        } else {
            (exact.matvec(x), approx.matvec(x)?)
        };
        Ok(a.iter().zip(&b).map(|(p, q)| p - q).collect())
    };
    let err_a = power_norm(|x| diff(x, false), |x| diff(x, true), n, iters, seed)?;
    let norm_inv = power_norm(|x| inv.apply(x), |x| inv.apply_transpose(x), n, iters, seed)?;
    Ok(ErrorEstimate {
        err_a,
        norm_inv,
        bound: err_a * norm_inv,
    })
}
