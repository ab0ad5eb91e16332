//! Changes of representation that keep the matrix fixed.

use super::HbsInverse;
use crate::hbs::{HbsMatrix, HbsNode};
use crate::linalg::{block_diag, svd_full, thin_qr};
use crate::quadrature::DenseMatrix;
use crate::tree::ROOT;

/// Rewrites an inverse in the standard HBS format with `U = E`, `V = F`.
///
/// Coarse to fine: the diagonal blocks `H` of each `G_τ` are pushed into the
/// children as `G_σ += E_σ H Fᵀ_σ`; the off-diagonal blocks become the
/// sibling couplings, and the leaf `G` become the diagonal blocks.
pub fn inverse_to_hbs(inv: &HbsInverse) -> HbsMatrix {
    let tree = inv.tree().clone();
    let levels = tree.levels();
    let src = inv.nodes();
    let mut g: Vec<DenseMatrix> = src.iter().map(|n| n.g.clone()).collect();
    let mut nodes = vec![HbsNode::default(); tree.node_count() + 1];
    for level in 0..levels {
        for tau in tree.level_nodes(level) {
            let (a, b) = (2 * tau, 2 * tau + 1);
            let (ka, kb) = (src[a].e.ncols(), src[b].e.ncols());
            let (la, lb) = (src[a].f.ncols(), src[b].f.ncols());
            let gt = &g[tau];
            let h11 = gt.view((0, 0), (ka, la)).into_owned();
            let h22 = gt.view((ka, la), (kb, lb)).into_owned();
            nodes[tau].b12 = gt.view((0, la), (ka, lb)).into_owned();
            nodes[tau].b21 = gt.view((ka, 0), (kb, la)).into_owned();
            g[a] += &src[a].e * h11 * src[a].f.transpose();
            g[b] += &src[b].e * h22 * src[b].f.transpose();
        }
    }
    for tau in tree.nodes() {
        if tau != ROOT {
            nodes[tau].u = src[tau].e.clone();
            nodes[tau].v = src[tau].f.clone();
        }
        if tree.is_leaf(tau) {
            nodes[tau].d = std::mem::replace(&mut g[tau], DenseMatrix::zeros(0, 0));
        }
    }
    HbsMatrix::from_parts(tree, nodes, false).expect("node count mirrors the tree")
}

/// Equivalent HBS matrix with orthonormal `U`, `V` and diagonal sibling
/// blocks (nonnegative, nonincreasing).
///
/// A fine-to-coarse QR sweep orthonormalizes the bases and pushes the
/// triangular factors into parents and `B` blocks. Each sibling block is
/// then replaced by its singular values, with the singular vectors
/// absorbed into the children's bases and the parent's rows.
pub fn reformat_orthonormal(a: &HbsMatrix) -> HbsMatrix {
    let tree = a.tree().clone();
    let levels = tree.levels();
    let mut nodes = a.nodes().to_vec();
    for n in nodes.iter_mut() {
        n.row_skeleton.clear();
        n.col_skeleton.clear();
    }
    if levels == 0 {
        return HbsMatrix::from_parts(tree, nodes, false).expect("same tree");
    }
    let count = nodes.len();
    let mut ru = vec![DenseMatrix::zeros(0, 0); count];
    let mut rv = vec![DenseMatrix::zeros(0, 0); count];
    for level in (1..=levels).rev() {
        for tau in tree.level_nodes(level) {
            if level < levels {
                let (c1, c2) = (2 * tau, 2 * tau + 1);
                nodes[tau].u = block_diag(&[&ru[c1], &ru[c2]]) * &nodes[tau].u;
                nodes[tau].v = block_diag(&[&rv[c1], &rv[c2]]) * &nodes[tau].v;
            }
            let (qu, r) = thin_qr(&nodes[tau].u);
            nodes[tau].u = qu;
            ru[tau] = r;
            let (qv, r) = thin_qr(&nodes[tau].v);
            nodes[tau].v = qv;
            rv[tau] = r;
        }
    }
    for level in 0..levels {
        for tau in tree.level_nodes(level) {
            let (c1, c2) = (2 * tau, 2 * tau + 1);
            let n = &mut nodes[tau];
            n.b12 = &ru[c1] * &n.b12 * rv[c2].transpose();
            n.b21 = &ru[c2] * &n.b21 * rv[c1].transpose();
        }
    }
    // Sibling block SVDs. Children's bases are rotated on the right and
    // the parent's row blocks by the transposed rotation on the left, so
    // the two updates commute and the order over parents is free.
    for level in 0..levels {
        for tau in tree.level_nodes(level) {
            let (c1, c2) = (2 * tau, 2 * tau + 1);
            let (x12, s12, y12) = svd_full(&nodes[tau].b12);
            let (x21, s21, y21) = svd_full(&nodes[tau].b21);
            nodes[tau].b12 = s12;
            nodes[tau].b21 = s21;
            nodes[c1].u = &nodes[c1].u * &x12;
            nodes[c2].v = &nodes[c2].v * &y12;
            nodes[c2].u = &nodes[c2].u * &x21;
            nodes[c1].v = &nodes[c1].v * &y21;
            if tau != ROOT {
                let n = &mut nodes[tau];
                n.u = block_diag(&[&x12, &x21]).tr_mul(&n.u);
                n.v = block_diag(&[&y21, &y12]).tr_mul(&n.v);
            }
        }
    }
    HbsMatrix::from_parts(tree, nodes, false).expect("same tree")
}
