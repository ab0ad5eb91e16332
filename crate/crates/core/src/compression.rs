//! Building HBS matrices by recursive skeletonization.
//!
//! Leaves are compressed first. A parent works only with the skeleton rows
//! and columns its children kept, so every basis is interpolatory and every
//! sibling block is a submatrix of the original matrix. The off-diagonal row
//! block of a node is either taken densely, or replaced by its near field
//! plus the field of a ring of proxy charges.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::hbs::{HbsMatrix, HbsNode};
use crate::linalg::{id_row, id_row_min_rank, InterpolatoryDecomposition};
use crate::quadrature::{DenseMatrix, MatrixEntries, QuadratureGrid};
use crate::tree::{IndexTree, ROOT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompressionMode {
    Dense,
    Proxy,
}

/// How the far field of a node's sources looks from outside.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyKernel {
    /// Sources are charges: `log|z - x_j| ω_j`.
    SingleLayer,
    /// Sources are dipoles along the inward normal, as in the assembled
    /// double-layer system.
    DoubleLayer,
}

/// Weight of the charge columns against the near-field block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyScaling {
    Unit,
    /// Mean quadrature weight of the node over `2π` times the proxy radius,
    /// the size of one far-field entry of the double-layer matrix.
    LocalWeight,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionConfig {
    pub tol: f64,
    pub proxy_points: usize,
    pub proxy_radius_factor: f64,
    pub symmetrize: bool,
    pub target_leaf: usize,
    pub mode: CompressionMode,
    pub proxy_kernel: ProxyKernel,
    pub proxy_scaling: ProxyScaling,
    /// Largest `N` the dense mode accepts.
    pub dense_limit: usize,
}

impl Default for CompressionConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            proxy_points: 50,
            proxy_radius_factor: 1.5,
            symmetrize: false,
            target_leaf: 64,
            mode: CompressionMode::Proxy,
            proxy_kernel: ProxyKernel::DoubleLayer,
            proxy_scaling: ProxyScaling::LocalWeight,
            dense_limit: 8000,
        }
    }
}

impl CompressionConfig {
    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.tol > 0.0) {
            return bad(format!("tolerance must be positive, got {}", self.tol));
        }
        if self.proxy_points < 8 {
            return bad(format!(
                "need at least 8 proxy points, got {}",
                self.proxy_points
            ));
        }
        if !(self.proxy_radius_factor > 1.0) {
            return bad(format!(
                "proxy radius factor must exceed 1, got {}",
                self.proxy_radius_factor
            ));
        }
        if self.target_leaf < 2 {
            return bad(format!(
                "target leaf size must be >= 2, got {}",
                self.target_leaf
            ));
        }
        Ok(())
    }
}

/// Global skeleton indices per node (entry 0 unused; the root is empty).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SkeletonSet {
    pub row: Vec<Vec<usize>>,
    pub col: Vec<Vec<usize>>,
}

/// Supplies the small matrices whose IDs give a node's skeletons.
trait Sampler: Sync {
    /// Rows `rows` against everything outside the node: `|rows| × m`.
    fn row_block(&self, tau: usize, rows: &[usize], level_cols: &[Vec<usize>]) -> DenseMatrix;
    /// Transposed column block: `|cols| × m`.
    fn col_block_t(&self, tau: usize, cols: &[usize], level_rows: &[Vec<usize>]) -> DenseMatrix;
}

struct DenseSampler<'a, K: MatrixEntries> {
    op: &'a K,
    tree: &'a IndexTree,
}

impl<K: MatrixEntries> DenseSampler<'_, K> {
    fn complement(&self, tau: usize) -> Vec<usize> {
        let r = self.tree.range(tau);
        (0..r.start).chain(r.end..self.tree.size()).collect()
    }
}

impl<K: MatrixEntries> Sampler for DenseSampler<'_, K> {
    fn row_block(&self, tau: usize, rows: &[usize], _: &[Vec<usize>]) -> DenseMatrix {
        self.op.block(rows, &self.complement(tau))
    }

    fn col_block_t(&self, tau: usize, cols: &[usize], _: &[Vec<usize>]) -> DenseMatrix {
        self.op.block(&self.complement(tau), cols).transpose()
    }
}

#[derive(Clone, Copy, Debug)]
struct Circle {
    center: Point,
    radius: f64,
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

struct ProxySampler<'a, K: MatrixEntries> {
    op: &'a K,
    grid: &'a QuadratureGrid,
    tree: &'a IndexTree,
    cfg: &'a CompressionConfig,
    bounds: Vec<Circle>,
}

impl<'a, K: MatrixEntries> ProxySampler<'a, K> {
    fn new(
        op: &'a K,
        grid: &'a QuadratureGrid,
        tree: &'a IndexTree,
        cfg: &'a CompressionConfig,
    ) -> Self {
        let mut bounds = vec![
            Circle {
                center: [0.0, 0.0],
                radius: 0.0
            };
            tree.node_count() + 1
        ];
        for tau in tree.nodes() {
            let r = tree.range(tau);
            let m = r.len() as f64;
            let mut c = [0.0, 0.0];
            for p in &grid.points[r.clone()] {
                c[0] += p[0] / m;
                c[1] += p[1] / m;
            }
            let radius = grid.points[r]
                .iter()
                .map(|&p| dist(p, c))
                .fold(0.0, f64::max);
            bounds[tau] = Circle { center: c, radius };
        }
        Self {
            op,
            grid,
            tree,
            cfg,
            bounds,
        }
    }

    fn proxy_circle(&self, tau: usize) -> Circle {
        let b = self.bounds[tau];
        Circle {
            center: b.center,
            radius: self.cfg.proxy_radius_factor * b.radius,
        }
    }

    /// True when every point outside the node lies inside its proxy circle.
    fn far_field_empty(&self, tau: usize) -> bool {
        let p = self.proxy_circle(tau);
        let root = self.bounds[ROOT];
        dist(root.center, p.center) + root.radius < p.radius
    }

    /// Active indices of other nodes on the same level inside the proxy
    /// circle. Subtrees whose bounding circles miss it are pruned.
    fn near(&self, tau: usize, active: &[Vec<usize>]) -> Vec<usize> {
        let level = self.tree.level_of(tau);
        let p = self.proxy_circle(tau);
        let mut out = Vec::new();
        let mut stack = vec![ROOT];
        while let Some(s) = stack.pop() {
            let b = self.bounds[s];
            if dist(b.center, p.center) > b.radius + p.radius {
                continue;
            }
            if self.tree.level_of(s) < level {
                stack.push(2 * s + 1);
                stack.push(2 * s);
                continue;
            }
            if s == tau {
                continue;
            }
            out.extend(
                active[s]
                    .iter()
                    .copied()
                    .filter(|&j| dist(self.grid.points[j], p.center) < p.radius),
            );
        }
        out.sort_unstable();
        out
    }

    fn row_proxy_scale(&self, tau: usize) -> f64 {
        match self.cfg.proxy_scaling {
            ProxyScaling::Unit => 1.0,
            ProxyScaling::LocalWeight => {
                let r = self.tree.range(tau);
                let m = r.len() as f64;
                let w = self.grid.weights[r].iter().sum::<f64>() / m;
                w / (2.0 * PI * self.proxy_circle(tau).radius)
            }
        }
    }

    fn proxy_points(&self, tau: usize) -> Vec<Point> {
        let c = self.proxy_circle(tau);
        let j = self.cfg.proxy_points;
        (0..j)
            .map(|p| {
                let t = 2.0 * PI * p as f64 / j as f64;
                [
                    c.center[0] + c.radius * t.cos(),
                    c.center[1] + c.radius * t.sin(),
                ]
            })
            .collect()
    }
}

impl<K: MatrixEntries> Sampler for ProxySampler<'_, K> {
    fn row_block(&self, tau: usize, rows: &[usize], level_cols: &[Vec<usize>]) -> DenseMatrix {
        let near = self.near(tau, level_cols);
        let near_block = self.op.block(rows, &near);
        if self.far_field_empty(tau) {
            return near_block;
        }
        // Targets inside the circle see the far field as a harmonic function,
        // spanned by charges on the circle plus a constant.
        let z = self.proxy_points(tau);
        let s = self.row_proxy_scale(tau);
        let mut out = DenseMatrix::zeros(rows.len(), near.len() + z.len() + 1);
        out.columns_mut(0, near.len()).copy_from(&near_block);
        for (a, &i) in rows.iter().enumerate() {
            let x = self.grid.points[i];
            for (p, &zp) in z.iter().enumerate() {
                out[(a, near.len() + p)] = s * dist(x, zp).ln();
            }
            out[(a, near.len() + z.len())] = s;
        }
        out
    }

    fn col_block_t(&self, tau: usize, cols: &[usize], level_rows: &[Vec<usize>]) -> DenseMatrix {
        let near = self.near(tau, level_rows);
        let near_block = self.op.block(&near, cols).transpose();
        if self.far_field_empty(tau) {
            return near_block;
        }
        // The field of the node's sources outside the circle is fixed by its
        // values on the circle.
        let z = self.proxy_points(tau);
        let g = self.grid;
        let mut out = DenseMatrix::zeros(cols.len(), near.len() + z.len());
        out.columns_mut(0, near.len()).copy_from(&near_block);
        for (a, &j) in cols.iter().enumerate() {
            let (y, n, w) = (g.points[j], g.normals[j], g.weights[j]);
            for (p, &zp) in z.iter().enumerate() {
                let v = match self.cfg.proxy_kernel {
                    ProxyKernel::SingleLayer => dist(zp, y).ln(),
                    ProxyKernel::DoubleLayer => {
                        let (dx, dy) = (zp[0] - y[0], zp[1] - y[1]);
                        -(n[0] * dx + n[1] * dy) / (2.0 * PI * (dx * dx + dy * dy))
                    }
                };
                out[(a, near.len() + p)] = v * w;
            }
        }
        out
    }
}

/// Compression of an explicitly stored matrix.
pub fn compress_dense(
    a: &DenseMatrix,
    tree: &IndexTree,
    cfg: &CompressionConfig,
) -> Result<(HbsMatrix, SkeletonSet)> {
    cfg.validate()?;
    let n = a.nrows();
    if n > cfg.dense_limit {
        return Err(Error::DenseLimit {
            n,
            limit: cfg.dense_limit,
        });
    }
    check_dims(n, a.ncols(), tree)?;
    skeletonize(&DenseSampler { op: a, tree }, a, tree, cfg)
}

/// Compression that touches only near-field entries of the system matrix
/// plus proxy interactions; no `N × N` array is formed.
pub fn compress_proxy<K: MatrixEntries>(
    grid: &QuadratureGrid,
    op: &K,
    tree: &IndexTree,
    cfg: &CompressionConfig,
) -> Result<(HbsMatrix, SkeletonSet)> {
    cfg.validate()?;
    check_dims(op.dim(), grid.len(), tree)?;
    let sampler = ProxySampler::new(op, grid, tree, cfg);
    skeletonize(&sampler, op, tree, cfg)
}

fn check_dims(n: usize, m: usize, tree: &IndexTree) -> Result<()> {
    if n != m {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m,
        });
    }
    if tree.size() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: tree.size(),
        });
    }
    Ok(())
}

struct NodeBases {
    row: InterpolatoryDecomposition,
    col: InterpolatoryDecomposition,
}

fn pad_columns(m: DenseMatrix, width: usize) -> DenseMatrix {
    if m.ncols() >= width {
        return m;
    }
    m.resize_horizontally(width, 0.0)
}

fn node_bases(r: DenseMatrix, ct: DenseMatrix, cfg: &CompressionConfig) -> NodeBases {
    if cfg.symmetrize {
        // Each half is normalized so that the tolerance applies to both
        // relative to their own size.
        let unit = |m: &DenseMatrix| {
            let s = m.norm();
            if s > 0.0 {
                m / s
            } else {
                m.clone()
            }
        };
        let n = r.nrows();
        let mut x = DenseMatrix::zeros(n, r.ncols() + ct.ncols());
        x.columns_mut(0, r.ncols()).copy_from(&unit(&r));
        x.columns_mut(r.ncols(), ct.ncols()).copy_from(&unit(&ct));
        let id = id_row(&x, cfg.tol);
        return NodeBases {
            row: id.clone(),
            col: id,
        };
    }
    let mut row = id_row(&r, cfg.tol);
    let mut col = id_row(&ct, cfg.tol);
    // The inversion needs square VᵀD̃⁻¹U, so both ranks are raised to the
    // larger one. Extra skeletons never hurt accuracy.
    let k = row.rank().max(col.rank());
    if row.rank() < k {
        row = id_row_min_rank(&pad_columns(r, k), cfg.tol, k);
    }
    if col.rank() < k {
        col = id_row_min_rank(&pad_columns(ct, k), cfg.tol, k);
    }
    NodeBases { row, col }
}

fn skeletonize<S: Sampler, K: MatrixEntries>(
    sampler: &S,
    op: &K,
    tree: &IndexTree,
    cfg: &CompressionConfig,
) -> Result<(HbsMatrix, SkeletonSet)> {
    let levels = tree.levels();
    let count = tree.node_count() + 1;
    let mut nodes = vec![HbsNode::default(); count];
    let mut skel = SkeletonSet {
        row: vec![vec![]; count],
        col: vec![vec![]; count],
    };
    for level in (1..=levels).rev() {
        let mut rows = vec![vec![]; count];
        let mut cols = vec![vec![]; count];
        for tau in tree.level_nodes(level) {
            if level == levels {
                rows[tau] = tree.range(tau).collect();
                cols[tau] = rows[tau].clone();
            } else {
                rows[tau] = [&skel.row[2 * tau][..], &skel.row[2 * tau + 1][..]].concat();
                cols[tau] = [&skel.col[2 * tau][..], &skel.col[2 * tau + 1][..]].concat();
            }
        }
        let bases: Vec<(usize, NodeBases)> = tree
            .level_nodes(level)
            .into_par_iter()
            .map(|tau| {
                let r = sampler.row_block(tau, &rows[tau], &cols);
                let ct = sampler.col_block_t(tau, &cols[tau], &rows);
                (tau, node_bases(r, ct, cfg))
            })
            .collect();
        for (tau, b) in bases {
            skel.row[tau] = b.row.skeleton.iter().map(|&j| rows[tau][j]).collect();
            skel.col[tau] = b.col.skeleton.iter().map(|&j| cols[tau][j]).collect();
            let node = &mut nodes[tau];
            node.u = b.row.interp;
            node.v = b.col.interp;
            node.row_skeleton = b.row.skeleton;
            node.col_skeleton = b.col.skeleton;
        }
    }
    let blocks: Vec<(usize, DenseMatrix, DenseMatrix)> = (1..1usize << levels)
        .into_par_iter()
        .map(|tau| {
            let (a, b) = (2 * tau, 2 * tau + 1);
            (
                tau,
                op.block(&skel.row[a], &skel.col[b]),
                op.block(&skel.row[b], &skel.col[a]),
            )
        })
        .collect();
    for (tau, b12, b21) in blocks {
        nodes[tau].b12 = b12;
        nodes[tau].b21 = b21;
    }
    let diag: Vec<(usize, DenseMatrix)> = tree
        .leaves()
        .into_par_iter()
        .map(|tau| {
            let r: Vec<usize> = tree.range(tau).collect();
            (tau, op.block(&r, &r))
        })
        .collect();
    for (tau, d) in diag {
        nodes[tau].d = d;
    }
    let a = HbsMatrix::from_parts(tree.clone(), nodes, true)?;
    Ok((a, skel))
}
