//! Exact inversion of HBS matrices.
//!
//! Each node `τ` is eliminated through the local block
//! `D̃_τ` (the leaf block `D_τ`, or the children's `D̂` coupled by the sibling
//! `B` blocks) using
//!
//! ```text
//! D̂ = (Vᵀ D̃⁻¹ U)⁻¹,   E = D̃⁻¹ U D̂,   Fᵀ = D̂ Vᵀ D̃⁻¹,   G = D̃⁻¹ − E Vᵀ D̃⁻¹
//! ```
//!
//! so that `A⁻¹` is again nested, with `E`/`F` in the roles of `U`/`V`.

mod block;
mod reformat;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use block::{bs_invert, BlockSeparableInverse, BlockSeparableMatrix};
pub use reformat::{inverse_to_hbs, reformat_orthonormal};

use crate::error::{Error, Result};
use crate::hbs::{HbsMatrix, HbsNode};
use crate::linalg::{inverse_with_cond, two_by_two};
use crate::quadrature::DenseMatrix;
use crate::tree::{IndexTree, ROOT};

/// Condition numbers above this are reported as warnings.
pub const COND_WARNING: f64 = 1e13;

pub(crate) struct LocalFactors {
    pub e: DenseMatrix,
    pub f: DenseMatrix,
    pub g: DenseMatrix,
    pub dhat: DenseMatrix,
    pub cond_dtilde: f64,
    pub cond_dhat: f64,
}

/// The four local formulas, with `D̃⁻¹U` and `VᵀD̃⁻¹` formed once.
pub(crate) fn local_factors(
    dtilde: &DenseMatrix,
    u: &DenseMatrix,
    v: &DenseMatrix,
) -> std::result::Result<LocalFactors, &'static str> {
    let (dinv, cond_dtilde) = inverse_with_cond(dtilde).ok_or("D̃ is singular")?;
    let dinv_u = &dinv * u;
    let vt_dinv = v.tr_mul(&dinv);
    let (dhat, cond_dhat) =
        inverse_with_cond(&(v.tr_mul(&dinv_u))).ok_or("Vᵀ D̃⁻¹ U is singular")?;
    let e = &dinv_u * &dhat;
    let ft = &dhat * &vt_dinv;
    let g = dinv - &e * &vt_dinv;
    Ok(LocalFactors {
        e,
        f: ft.transpose(),
        g,
        dhat,
        cond_dtilde,
        cond_dhat,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct InverseNode {
    pub e: DenseMatrix,
    /// Stored untransposed; the algorithms use `Fᵀ`.
    pub f: DenseMatrix,
    /// At the root this is `G_1`, the inverse of the top coupled block.
    pub g: DenseMatrix,
    pub dhat: DenseMatrix,
}

impl Default for InverseNode {
    fn default() -> Self {
        let z = || DenseMatrix::zeros(0, 0);
        Self {
            e: z(),
            f: z(),
            g: z(),
            dhat: z(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeCondition {
    pub node: usize,
    pub level: usize,
    pub dtilde: f64,
    pub dhat: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InversionTelemetry {
    pub nodes: Vec<NodeCondition>,
    pub root: f64,
    pub warnings: Vec<String>,
}

impl InversionTelemetry {
    pub fn max_condition(&self) -> f64 {
        self.nodes
            .iter()
            .flat_map(|c| [c.dtilde, c.dhat])
            .fold(self.root, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HbsInverse {
    tree: IndexTree,
    nodes: Vec<InverseNode>,
    telemetry: InversionTelemetry,
}

impl HbsInverse {
    pub fn from_parts(tree: IndexTree, nodes: Vec<InverseNode>) -> Result<Self> {
        if nodes.len() != tree.node_count() + 1 {
            return Err(Error::DimensionMismatch {
                expected: tree.node_count() + 1,
                got: nodes.len(),
            });
        }
        Ok(Self {
            tree,
            nodes,
            telemetry: InversionTelemetry::default(),
        })
    }

    pub fn tree(&self) -> &IndexTree {
        &self.tree
    }

    pub fn size(&self) -> usize {
        self.tree.size()
    }

    pub fn node(&self, tau: usize) -> &InverseNode {
        &self.nodes[tau]
    }

    pub fn nodes(&self) -> &[InverseNode] {
        &self.nodes
    }

    pub fn telemetry(&self) -> &InversionTelemetry {
        &self.telemetry
    }

    /// Inverse of `Aᵀ`.
    pub fn transpose(&self) -> Self {
        let nodes = self
            .nodes
            .iter()
            .map(|n| InverseNode {
                e: n.f.clone(),
                f: n.e.clone(),
                g: n.g.transpose(),
                dhat: n.dhat.transpose(),
            })
            .collect();
        Self {
            tree: self.tree.clone(),
            nodes,
            telemetry: self.telemetry.clone(),
        }
    }

    /// `q = A⁻¹ u`.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.apply_impl(u, false)
    }

    /// `q = A⁻ᵀ u`, without materializing the transposed factors.
    pub fn apply_transpose(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.apply_impl(u, true)
    }

    fn apply_impl(&self, u: &[f64], transposed: bool) -> Result<Vec<f64>> {
        let n = self.size();
        if u.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: u.len(),
            });
        }
        let tree = &self.tree;
        let levels = tree.levels();
        // In transposed mode E and F trade places and G is applied as Gᵀ.
        let ein = |t: usize| {
            let nd = &self.nodes[t];
            if transposed {
                &nd.e
            } else {
                &nd.f
            }
        };
        let eout = |t: usize| {
            let nd = &self.nodes[t];
            if transposed {
                &nd.f
            } else {
                &nd.e
            }
        };
        let g = |t: usize, x: &DVector<f64>| -> DVector<f64> {
            if transposed {
                self.nodes[t].g.tr_mul(x)
            } else {
                &self.nodes[t].g * x
            }
        };
        if levels == 0 {
            return Ok(g(ROOT, &DVector::from_column_slice(u)).as_slice().to_vec());
        }
        let count = self.nodes.len();
        let mut local: Vec<DVector<f64>> = vec![DVector::zeros(0); count];
        let mut uhat: Vec<DVector<f64>> = vec![DVector::zeros(0); count];
        for tau in tree.leaves() {
            local[tau] = DVector::from_column_slice(&u[tree.range(tau)]);
            uhat[tau] = ein(tau).tr_mul(&local[tau]);
        }
        for level in (1..levels).rev() {
            for tau in tree.level_nodes(level) {
                local[tau] = stack(&uhat[2 * tau], &uhat[2 * tau + 1]);
                uhat[tau] = ein(tau).tr_mul(&local[tau]);
            }
        }
        let top = stack(&uhat[2], &uhat[3]);
        let mut qhat: Vec<DVector<f64>> = vec![DVector::zeros(0); count];
        split_into(&g(ROOT, &top), &mut qhat, 2, uhat[2].len());
        for level in 1..levels {
            for tau in tree.level_nodes(level) {
                let q = eout(tau) * &qhat[tau] + g(tau, &local[tau]);
                split_into(&q, &mut qhat, 2 * tau, uhat[2 * tau].len());
            }
        }
        let mut out = vec![0.0; n];
        for tau in tree.leaves() {
            let q = eout(tau) * &qhat[tau] + g(tau, &local[tau]);
            out[tree.range(tau)].copy_from_slice(q.as_slice());
        }
        Ok(out)
    }
}

fn stack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}

fn split_into(v: &DVector<f64>, dst: &mut [DVector<f64>], first: usize, k: usize) {
    dst[first] = v.rows(0, k).into_owned();
    dst[first + 1] = v.rows(k, v.len() - k).into_owned();
}

/// `[D̂_σ1 B12; B21 D̂_σ2]` for a parent whose children are already eliminated.
fn coupled(nodes: &[InverseNode], parent: &HbsNode, tau: usize) -> DenseMatrix {
    two_by_two(
        &nodes[2 * tau].dhat,
        &parent.b12,
        &parent.b21,
        &nodes[2 * tau + 1].dhat,
    )
}

/// Fine-to-coarse elimination. Nodes on one level run in parallel.
pub fn hbs_invert(a: &HbsMatrix) -> Result<HbsInverse> {
    let tree = a.tree().clone();
    let levels = tree.levels();
    let mut nodes = vec![InverseNode::default(); tree.node_count() + 1];
    let mut telemetry = InversionTelemetry::default();
    for level in (1..=levels).rev() {
        let done = &nodes;
        let results: Vec<Result<(usize, InverseNode, NodeCondition)>> = tree
            .level_nodes(level)
            .into_par_iter()
            .map(|tau| {
                let node = a.node(tau);
                if node.row_rank() != node.col_rank() {
                    return Err(Error::UnequalRanks {
                        node: tau,
                        row: node.row_rank(),
                        col: node.col_rank(),
                    });
                }
                let dtilde = if level == levels {
                    node.d.clone()
                } else {
                    coupled(done, node, tau)
                };
                let lf = local_factors(&dtilde, &node.u, &node.v).map_err(|what| {
                    Error::SingularNode {
                        node: tau,
                        level,
                        what,
                    }
                })?;
                let cond = NodeCondition {
                    node: tau,
                    level,
                    dtilde: lf.cond_dtilde,
                    dhat: lf.cond_dhat,
                };
                let inv = InverseNode {
                    e: lf.e,
                    f: lf.f,
                    g: lf.g,
                    dhat: lf.dhat,
                };
                Ok((tau, inv, cond))
            })
            .collect();
        for r in results {
            let (tau, inv, cond) = r?;
            nodes[tau] = inv;
            for (what, c) in [("D̃", cond.dtilde), ("D̂", cond.dhat)] {
                if c > COND_WARNING {
                    telemetry.warnings.push(format!(
                        "node {tau} (level {level}): cond({what}) = {c:.3e}"
                    ));
                }
            }
            telemetry.nodes.push(cond);
        }
    }
    let top = if levels == 0 {
        a.node(ROOT).d.clone()
    } else {
        coupled(&nodes, a.node(ROOT), ROOT)
    };
    let (g1, c) = inverse_with_cond(&top).ok_or(Error::SingularNode {
        node: ROOT,
        level: 0,
        what: "root block is singular",
    })?;
    if c > COND_WARNING {
        telemetry.warnings.push(format!("root: cond = {c:.3e}"));
    }
    telemetry.root = c;
    nodes[ROOT].g = g1;
    Ok(HbsInverse {
        tree,
        nodes,
        telemetry,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hbs::tests::random_hbs;
    use crate::tree::build_tree;

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }

    fn dense_solve(a: &DenseMatrix, u: &[f64]) -> Vec<f64> {
        a.clone()
            .lu()
            .solve(&DVector::from_column_slice(u))
            .unwrap()
            .as_slice()
            .to_vec()
    }

    #[test]
    fn single_node_tree_inverts_densely() {
        let tree = build_tree(6, 10).unwrap();
        let d = DenseMatrix::from_fn(6, 6, |i, j| {
            if i == j {
                3.0
            } else {
                1.0 / (1 + i + j) as f64
            }
        });
        let a = HbsMatrix::block_diagonal(tree, vec![d.clone()]).unwrap();
        let inv = hbs_invert(&a).unwrap();
        let expect = d.try_inverse().unwrap();
        assert!((&inv.node(ROOT).g - expect).norm() < 1e-14);
    }

    #[test]
    fn block_diagonal_inverse() {
        let tree = build_tree(40, 10).unwrap();
        let blocks: Vec<_> = tree
            .leaves()
            .map(|t| {
                let n = tree.range(t).len();
                DenseMatrix::from_fn(n, n, |i, j| {
                    if i == j {
                        2.0 + t as f64
                    } else {
                        0.1 * (i as f64 - j as f64)
                    }
                })
            })
            .collect();
        let a = HbsMatrix::block_diagonal(tree.clone(), blocks.clone()).unwrap();
        let inv = hbs_invert(&a).unwrap();
        let u: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        let q = inv.apply(&u).unwrap();
        for (t, d) in tree.leaves().zip(&blocks) {
            let r = tree.range(t);
            assert!(rel(&q[r.clone()], &dense_solve(d, &u[r])) < 1e-14);
        }
        assert!(inv.apply(&[0.0; 40]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_dense_inverse() {
        for (seed, n, leaf) in [(1u64, 200usize, 12usize), (2, 97, 8), (3, 64, 40)] {
            let a = random_hbs(n, leaf, |t| 2 + t % 3, seed);
            let dense = a.expand_dense().unwrap();
            let inv = hbs_invert(&a).unwrap();
            let u: Vec<f64> = (0..n).map(|i| ((i * 5 % 11) as f64).cos()).collect();
            assert!(rel(&inv.apply(&u).unwrap(), &dense_solve(&dense, &u)) < 1e-9);
            let ut = dense.transpose();
            assert!(rel(&inv.apply_transpose(&u).unwrap(), &dense_solve(&ut, &u)) < 1e-9);
            assert!(rel(&inv.transpose().apply(&u).unwrap(), &dense_solve(&ut, &u)) < 1e-9);
            // Round trip through the forward matvec.
            assert!(rel(&inv.apply(&a.matvec(&u).unwrap()).unwrap(), &u) < 1e-9);
            assert_eq!(inv.telemetry().nodes.len(), a.tree().node_count() - 1);
        }
    }

    #[test]
    fn singular_leaf_names_node() {
        let mut a = random_hbs(64, 8, |_| 2, 4);
        a.node_mut(10).d.fill(0.0);
        match hbs_invert(&a) {
            Err(Error::SingularNode {
                node: 10, level: 3, ..
            }) => {}
            other => panic!("{other:?}"),
        }
        assert!(hbs_invert(&random_hbs(64, 8, |_| 2, 4))
            .unwrap()
            .apply(&[1.0; 3])
            .is_err());
    }

    #[test]
    fn unequal_ranks_are_rejected() {
        let mut a = random_hbs(32, 8, |_| 2, 4);
        let n = a.node(4).v.nrows();
        a.node_mut(4).v = DenseMatrix::zeros(n, 1);
        assert!(matches!(
            hbs_invert(&a),
            Err(Error::UnequalRanks { node: 4, .. })
        ));
    }
}
