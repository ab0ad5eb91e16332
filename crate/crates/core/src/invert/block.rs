//! Single-level block-separable matrices `A = U Ã Vᵀ + D` and their
//! inversion through the compressed core `Ã + D̂`.

use nalgebra::DVector;

use super::{local_factors, LocalFactors, COND_WARNING};
use crate::error::{Error, Result};
use crate::linalg::{block_diag, inverse_with_cond};
use crate::quadrature::DenseMatrix;

/// `p` diagonal blocks with flank bases; `core` is `Ã`, indexed by the
/// concatenated ranks, with zero diagonal blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSeparableMatrix {
    pub d: Vec<DenseMatrix>,
    pub u: Vec<DenseMatrix>,
    pub v: Vec<DenseMatrix>,
    pub core: DenseMatrix,
}

impl BlockSeparableMatrix {
    pub fn new(
        d: Vec<DenseMatrix>,
        u: Vec<DenseMatrix>,
        v: Vec<DenseMatrix>,
        core: DenseMatrix,
    ) -> Result<Self> {
        let p = d.len();
        if u.len() != p || v.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: u.len().min(v.len()),
            });
        }
        let mut k = 0;
        for i in 0..p {
            let n = d[i].nrows();
            if d[i].ncols() != n || u[i].nrows() != n || v[i].nrows() != n {
                return Err(Error::InvalidArgument(format!(
                    "block {i} has inconsistent shapes"
                )));
            }
            if u[i].ncols() != v[i].ncols() {
                return Err(Error::InvalidArgument(format!(
                    "block {i} has unequal ranks"
                )));
            }
            k += u[i].ncols();
        }
        if core.shape() != (k, k) {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: core.nrows(),
            });
        }
        Ok(Self { d, u, v, core })
    }

    pub fn blocks(&self) -> usize {
        self.d.len()
    }

    pub fn size(&self) -> usize {
        self.d.iter().map(|b| b.nrows()).sum()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let refs = |m: &[DenseMatrix]| block_diag(&m.iter().collect::<Vec<_>>());
        refs(&self.u) * &self.core * refs(&self.v).transpose() + refs(&self.d)
    }
}

/// Factors of `A⁻¹ = E (Ã + D̂)⁻¹ Fᵀ + G`.
#[derive(Clone, Debug)]
pub struct BlockSeparableInverse {
    pub e: Vec<DenseMatrix>,
    pub f: Vec<DenseMatrix>,
    pub g: Vec<DenseMatrix>,
    pub dhat: Vec<DenseMatrix>,
    /// `(Ã + D̂)⁻¹`.
    pub core_inverse: DenseMatrix,
    /// `Ã + D̂` itself, kept for inspection.
    pub core_shifted: DenseMatrix,
    pub max_condition: f64,
    pub warnings: Vec<String>,
}

pub fn bs_invert(a: &BlockSeparableMatrix) -> Result<BlockSeparableInverse> {
    let p = a.blocks();
    let mut out = BlockSeparableInverse {
        e: Vec::with_capacity(p),
        f: Vec::with_capacity(p),
        g: Vec::with_capacity(p),
        dhat: Vec::with_capacity(p),
        core_inverse: DenseMatrix::zeros(0, 0),
        core_shifted: DenseMatrix::zeros(0, 0),
        max_condition: 1.0,
        warnings: vec![],
    };
    for i in 0..p {
        let LocalFactors {
            e,
            f,
            g,
            dhat,
            cond_dtilde,
            cond_dhat,
        } = local_factors(&a.d[i], &a.u[i], &a.v[i])
            .map_err(|_| Error::SingularBlock { block: i })?;
        for (what, c) in [("D", cond_dtilde), ("D̂", cond_dhat)] {
            note(&mut out, c, || format!("block {i}: cond({what}) = {c:.3e}"));
        }
        out.e.push(e);
        out.f.push(f);
        out.g.push(g);
        out.dhat.push(dhat);
    }
    let shifted = &a.core + block_diag(&out.dhat.iter().collect::<Vec<_>>());
    let (inv, c) = inverse_with_cond(&shifted).ok_or(Error::SingularCore)?;
    note(&mut out, c, || format!("core: cond(Ã + D̂) = {c:.3e}"));
    out.core_inverse = inv;
    out.core_shifted = shifted;
    Ok(out)
}

fn note(out: &mut BlockSeparableInverse, cond: f64, msg: impl FnOnce() -> String) {
    out.max_condition = out.max_condition.max(cond);
    if cond > COND_WARNING {
        out.warnings.push(msg());
    }
}

impl BlockSeparableInverse {
    pub fn size(&self) -> usize {
        self.g.iter().map(|g| g.nrows()).sum()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.size() {
            return Err(Error::DimensionMismatch {
                expected: self.size(),
                got: x.len(),
            });
        }
        let mut xs = Vec::with_capacity(self.g.len());
        let mut start = 0;
        let mut xhat = Vec::new();
        for f in &self.f {
            let xi = DVector::from_column_slice(&x[start..start + f.nrows()]);
            xhat.extend(f.tr_mul(&xi).iter());
            start += f.nrows();
            xs.push(xi);
        }
        let qhat = &self.core_inverse * DVector::from_vec(xhat);
        let mut out = Vec::with_capacity(x.len());
        let mut k0 = 0;
        for ((e, g), xi) in self.e.iter().zip(&self.g).zip(&xs) {
            let k = e.ncols();
            let qi = e * qhat.rows(k0, k) + g * xi;
            out.extend(qi.iter());
            k0 += k;
        }
        Ok(out)
    }
}
