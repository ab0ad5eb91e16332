//! Hierarchically block-separable matrices.
//!
//! Every non-root node `τ` carries basis matrices `U_τ`, `V_τ`: `n_τ × k_τ`
//! at leaves, `(k_σ1 + k_σ2) × k_τ` at parents. Leaves carry the diagonal
//! block `D_τ`; parents carry the sibling interactions `B_{σ1,σ2}` and
//! `B_{σ2,σ1}`. Row and column ranks may differ per node.

mod validate;

use nalgebra::DVector;

pub use validate::Violation;

use crate::error::{Error, Result};
use crate::quadrature::DenseMatrix;
use crate::tree::{IndexTree, ROOT};

/// Largest `N` for which [`HbsMatrix::expand_dense`] will form the matrix.
pub const EXPAND_LIMIT: usize = 5000;

pub(crate) fn empty() -> DenseMatrix {
    DenseMatrix::zeros(0, 0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HbsNode {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
    /// Diagonal block; leaves only.
    pub d: DenseMatrix,
    /// `B_{σ1,σ2}`: rows of the first child, columns of the second. Parents only.
    pub b12: DenseMatrix,
    pub b21: DenseMatrix,
    /// Positions `J` with `U(J,:) = I`, when the basis is interpolatory.
    pub row_skeleton: Vec<usize>,
    pub col_skeleton: Vec<usize>,
}

impl Default for HbsNode {
    fn default() -> Self {
        Self {
            u: empty(),
            v: empty(),
            d: empty(),
            b12: empty(),
            b21: empty(),
            row_skeleton: vec![],
            col_skeleton: vec![],
        }
    }
}

impl HbsNode {
    pub fn row_rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn col_rank(&self) -> usize {
        self.v.ncols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HbsMatrix {
    tree: IndexTree,
    nodes: Vec<HbsNode>,
    /// `U`/`V` contain identity rows at the recorded skeleton positions.
    interpolatory: bool,
}

impl HbsMatrix {
    /// Assembles a matrix from per-node factors, indexed by node number
    /// (entry 0 unused). Shapes are checked by [`HbsMatrix::validate`].
    pub fn from_parts(tree: IndexTree, nodes: Vec<HbsNode>, interpolatory: bool) -> Result<Self> {
        if nodes.len() != tree.node_count() + 1 {
            return Err(Error::DimensionMismatch {
                expected: tree.node_count() + 1,
                got: nodes.len(),
            });
        }
        Ok(Self {
            tree,
            nodes,
            interpolatory,
        })
    }

    /// Block-diagonal matrix with every rank zero.
    pub fn block_diagonal(tree: IndexTree, blocks: Vec<DenseMatrix>) -> Result<Self> {
        let mut nodes = vec![HbsNode::default(); tree.node_count() + 1];
        if blocks.len() != tree.leaves().len() {
            return Err(Error::DimensionMismatch {
                expected: tree.leaves().len(),
                got: blocks.len(),
            });
        }
        for (tau, d) in tree.leaves().zip(blocks) {
            let n = tree.range(tau).len();
            let node = &mut nodes[tau];
            node.u = DenseMatrix::zeros(n, 0);
            node.v = DenseMatrix::zeros(n, 0);
            node.d = d;
        }
        for tau in tree.nodes() {
            if tree.is_leaf(tau) {
                continue;
            }
            if tau != ROOT {
                nodes[tau].u = DenseMatrix::zeros(0, 0);
                nodes[tau].v = DenseMatrix::zeros(0, 0);
            }
            nodes[tau].b12 = DenseMatrix::zeros(0, 0);
            nodes[tau].b21 = DenseMatrix::zeros(0, 0);
        }
        Self::from_parts(tree, nodes, false)
    }

    pub fn tree(&self) -> &IndexTree {
        &self.tree
    }

    pub fn size(&self) -> usize {
        self.tree.size()
    }

    pub fn node(&self, tau: usize) -> &HbsNode {
        &self.nodes[tau]
    }

    pub fn node_mut(&mut self, tau: usize) -> &mut HbsNode {
        &mut self.nodes[tau]
    }

    pub fn nodes(&self) -> &[HbsNode] {
        &self.nodes
    }

    pub fn is_interpolatory(&self) -> bool {
        self.interpolatory
    }

    pub fn set_interpolatory(&mut self, flag: bool) {
        self.interpolatory = flag;
    }

    pub fn max_rank(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| n.row_rank().max(n.col_rank()))
            .max()
            .unwrap_or(0)
    }

    /// Ranks `(row, col)` of every node on a level.
    pub fn level_ranks(&self, level: usize) -> Vec<(usize, usize)> {
        self.tree
            .level_nodes(level)
            .map(|t| (self.nodes[t].row_rank(), self.nodes[t].col_rank()))
            .collect()
    }

    /// Total number of stored reals.
    pub fn stored_reals(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| n.u.len() + n.v.len() + n.d.len() + n.b12.len() + n.b21.len())
            .sum()
    }

    /// `Aᵀ` in the same format: bases swap roles and blocks transpose.
    pub fn transpose(&self) -> Self {
        let nodes = self
            .nodes
            .iter()
            .map(|n| HbsNode {
                u: n.v.clone(),
                v: n.u.clone(),
                d: n.d.transpose(),
                b12: n.b21.transpose(),
                b21: n.b12.transpose(),
                row_skeleton: n.col_skeleton.clone(),
                col_skeleton: n.row_skeleton.clone(),
            })
            .collect();
        Self {
            tree: self.tree.clone(),
            nodes,
            interpolatory: self.interpolatory,
        }
    }

    /// `u = A q` through the telescoping factorization: an upward pass
    /// compressing `q` with `Vᵀ`, sibling couplings, and a downward pass
    /// expanding with `U`.
    pub fn matvec(&self, q: &[f64]) -> Result<Vec<f64>> {
        let n = self.size();
        if q.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: q.len(),
            });
        }
        let tree = &self.tree;
        let levels = tree.levels();
        let mut out = vec![0.0; n];
        if levels == 0 {
            let d = &self.nodes[ROOT].d;
            let u = d * DVector::from_column_slice(q);
            out.copy_from_slice(u.as_slice());
            return Ok(out);
        }
        let count = self.nodes.len();
        let mut qhat: Vec<DVector<f64>> = vec![DVector::zeros(0); count];
        for tau in tree.leaves() {
            let r = tree.range(tau);
            qhat[tau] = self.nodes[tau].v.tr_mul(&DVector::from_column_slice(&q[r]));
        }
        for level in (1..levels).rev() {
            for tau in tree.level_nodes(level) {
                let stacked = stack(&qhat[2 * tau], &qhat[2 * tau + 1]);
                qhat[tau] = self.nodes[tau].v.tr_mul(&stacked);
            }
        }
        let mut uhat: Vec<DVector<f64>> = vec![DVector::zeros(0); count];
        for level in 0..levels {
            for tau in tree.level_nodes(level) {
                let (a, b) = (2 * tau, 2 * tau + 1);
                let node = &self.nodes[tau];
                let ka = self.nodes[a].row_rank();
                let kb = self.nodes[b].row_rank();
                let mut ua = &node.b12 * &qhat[b];
                let mut ub = &node.b21 * &qhat[a];
                if tau != ROOT {
                    let base = &node.u * &uhat[tau];
                    ua += base.rows(0, ka);
                    ub += base.rows(ka, kb);
                }
                uhat[a] = ua;
                uhat[b] = ub;
            }
        }
        for tau in tree.leaves() {
            let r = tree.range(tau);
            let node = &self.nodes[tau];
            let u = &node.u * &uhat[tau] + &node.d * DVector::from_column_slice(&q[r.clone()]);
            out[r].copy_from_slice(u.as_slice());
        }
        Ok(out)
    }

    pub fn matvec_transpose(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.transpose().matvec(q)
    }

    /// Extended bases `U_τ^ext`, `V_τ^ext` (`n_τ × k_τ`) for every non-root node.
    pub fn extended_bases(&self) -> (Vec<DenseMatrix>, Vec<DenseMatrix>) {
        let tree = &self.tree;
        let count = self.nodes.len();
        let mut eu = vec![empty(); count];
        let mut ev = vec![empty(); count];
        if tree.levels() == 0 {
            return (eu, ev);
        }
        for tau in tree.leaves() {
            eu[tau] = self.nodes[tau].u.clone();
            ev[tau] = self.nodes[tau].v.clone();
        }
        for level in (1..tree.levels()).rev() {
            for tau in tree.level_nodes(level) {
                let (a, b) = (2 * tau, 2 * tau + 1);
                eu[tau] = extend(&eu[a], &eu[b], &self.nodes[tau].u);
                ev[tau] = extend(&ev[a], &ev[b], &self.nodes[tau].v);
            }
        }
        (eu, ev)
    }

    /// The dense matrix represented by the factors.
    pub fn expand_dense(&self) -> Result<DenseMatrix> {
        let n = self.size();
        if n > EXPAND_LIMIT {
            return Err(Error::DenseLimit {
                n,
                limit: EXPAND_LIMIT,
            });
        }
        let tree = &self.tree;
        let mut a = DenseMatrix::zeros(n, n);
        for tau in tree.leaves() {
            let r = tree.range(tau);
            a.view_mut((r.start, r.start), (r.len(), r.len()))
                .copy_from(&self.nodes[tau].d);
        }
        let (eu, ev) = self.extended_bases();
        for level in 0..tree.levels() {
            for tau in tree.level_nodes(level) {
                let (s1, s2) = (2 * tau, 2 * tau + 1);
                let (r1, r2) = (tree.range(s1), tree.range(s2));
                let node = &self.nodes[tau];
                let top = &eu[s1] * &node.b12 * ev[s2].transpose();
                let bottom = &eu[s2] * &node.b21 * ev[s1].transpose();
                a.view_mut((r1.start, r2.start), (r1.len(), r2.len()))
                    .copy_from(&top);
                a.view_mut((r2.start, r1.start), (r2.len(), r1.len()))
                    .copy_from(&bottom);
            }
        }
        Ok(a)
    }
}

fn stack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}

/// `diag(ext_a, ext_b) * basis`.
fn extend(ext_a: &DenseMatrix, ext_b: &DenseMatrix, basis: &DenseMatrix) -> DenseMatrix {
    let ka = ext_a.ncols();
    let kb = ext_b.ncols();
    let top = ext_a * basis.rows(0, ka);
    let bottom = ext_b * basis.rows(ka, kb);
    let mut out = DenseMatrix::zeros(top.nrows() + bottom.nrows(), basis.ncols());
    out.rows_mut(0, top.nrows()).copy_from(&top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(&bottom);
    out
}
