//! Composite Gauss-Legendre Nystrom grids and the Laplace double-layer system.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Contour, PanelDecomposition, Point};

pub type DenseMatrix = DMatrix<f64>;

pub const DEFAULT_NODES_PER_PANEL: usize = 10;
pub const MAX_GAUSS_NODES: usize = 64;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// nodes in increasing order.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(1..=MAX_GAUSS_NODES).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "Gauss-Legendre order must be in 1..={MAX_GAUSS_NODES}, got {n}"
        )));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Newton on P_n from the Chebyshev-like initial guess, largest root first.
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let pm1 = if n == 0 { 0.0 } else { p0 };
    let d = n as f64 * (x * p - pm1) / (x * x - 1.0);
    (p, d)
}

/// Nystrom nodes on a curve, ordered by parameter with contiguous panels.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureGrid {
    pub nodes: Vec<f64>,
    pub points: Vec<Point>,
    /// Outward unit normals.
    pub normals: Vec<Point>,
    /// Gauss weight times the speed `|γ'(t)|`.
    pub weights: Vec<f64>,
    pub curvature: Vec<f64>,
    pub panel_of: Vec<usize>,
    pub nodes_per_panel: usize,
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn panel_count(&self) -> usize {
        self.panel_of.last().map_or(0, |p| p + 1)
    }

    /// Sum of the weights; approximates the arc length.
    pub fn total_length(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Arc length of each panel.
    pub fn panel_lengths(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.panel_count()];
        for (p, w) in self.panel_of.iter().zip(&self.weights) {
            out[*p] += w;
        }
        out
    }
}

pub fn build_grid(
    contour: &Contour,
    panels: &PanelDecomposition,
    nodes_per_panel: usize,
) -> Result<QuadratureGrid> {
    if nodes_per_panel < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 nodes per panel, got {nodes_per_panel}"
        )));
    }
    let (x, w) = gauss_legendre(nodes_per_panel)?;
    let n = panels.len() * nodes_per_panel;
    let mut grid = QuadratureGrid {
        nodes: Vec::with_capacity(n),
        points: Vec::with_capacity(n),
        normals: Vec::with_capacity(n),
        weights: Vec::with_capacity(n),
        curvature: Vec::with_capacity(n),
        panel_of: Vec::with_capacity(n),
        nodes_per_panel,
    };
    for (p, &(a, b)) in panels.panels.iter().enumerate() {
        let half = 0.5 * (b - a);
        for (xi, wi) in x.iter().zip(&w) {
            let t = a + half * (1.0 + xi);
            let c = contour.eval(t);
            grid.nodes.push(t);
            grid.points.push(c.position);
            grid.normals.push(c.outward_normal());
            grid.weights.push(wi * half * c.speed());
            grid.curvature.push(c.curvature());
            grid.panel_of.push(p);
        }
    }
    Ok(grid)
}

/// Double-layer kernel `n(y)·(x - y) / (2π|x - y|²)` with the interior
/// (inward) normal at the source `y`, so that `½q + Kq = f` is the interior
/// Dirichlet equation.
#[inline]
pub fn dlp_kernel(x: Point, y: Point, outward_normal_y: Point) -> f64 {
    let dx = x[0] - y[0];
    let dy = x[1] - y[1];
    -(outward_normal_y[0] * dx + outward_normal_y[1] * dy) / (2.0 * PI * (dx * dx + dy * dy))
}

/// Limit of the kernel as the source approaches the target along the curve.
#[inline]
pub fn dlp_diagonal(curvature: f64) -> f64 {
    curvature / (4.0 * PI)
}

/// Row/column access to a Nystrom system matrix without forming it.
pub trait MatrixEntries: Sync {
    fn dim(&self) -> usize;

    fn entry(&self, i: usize, j: usize) -> f64;

    fn block(&self, rows: &[usize], cols: &[usize]) -> DenseMatrix {
        DenseMatrix::from_fn(rows.len(), cols.len(), |a, b| self.entry(rows[a], cols[b]))
    }

    fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| self.entry(i, j) * x[j]).sum())
            .collect()
    }

    fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .into_par_iter()
            .map(|j| (0..n).map(|i| self.entry(i, j) * x[i]).sum())
            .collect()
    }
}

impl MatrixEntries for DenseMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self[(i, j)]
    }

    fn block(&self, rows: &[usize], cols: &[usize]) -> DenseMatrix {
        self.select_rows(rows).select_columns(cols)
    }

    fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (self * nalgebra::DVector::from_column_slice(x))
            .as_slice()
            .to_vec()
    }

    fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        (self.tr_mul(&nalgebra::DVector::from_column_slice(x)))
            .as_slice()
            .to_vec()
    }
}

/// The matrix `½I + K diag(ω)`, evaluated entry by entry.
#[derive(Clone, Copy, Debug)]
pub struct DoubleLayerOperator<'a> {
    grid: &'a QuadratureGrid,
}

impl<'a> DoubleLayerOperator<'a> {
    pub fn new(grid: &'a QuadratureGrid) -> Result<Self> {
        if grid.panel_count() < 2 || grid.len() < 2 {
            return Err(Error::InvalidArgument(
                "double-layer system needs a grid with at least 2 panels".into(),
            ));
        }
        Ok(Self { grid })
    }

    pub fn grid(&self) -> &'a QuadratureGrid {
        self.grid
    }
}

impl MatrixEntries for DoubleLayerOperator<'_> {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    #[inline]
    fn entry(&self, i: usize, j: usize) -> f64 {
        let g = self.grid;
        if i == j {
            0.5 + dlp_diagonal(g.curvature[i]) * g.weights[i]
        } else {
            dlp_kernel(g.points[i], g.points[j], g.normals[j]) * g.weights[j]
        }
    }
}

/// Dense `A(i,j) = ½δ_ij + K(x_i, x_j) ω_j`.
pub fn assemble_dlp(grid: &QuadratureGrid) -> Result<DenseMatrix> {
    let op = DoubleLayerOperator::new(grid)?;
    let n = grid.len();
    check_distinct_nodes(grid)?;
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| (0..n).map(|i| op.entry(i, j)).collect())
        .collect();
    Ok(DenseMatrix::from_fn(n, n, |i, j| cols[j][i]))
}

fn check_distinct_nodes(grid: &QuadratureGrid) -> Result<()> {
    // Coincident nodes can only come from adjacent panels or the wrap-around,
    // so compare each node with its neighbours in parameter order.
    let n = grid.len();
    let npp = grid.nodes_per_panel;
    for i in 0..n {
        for off in 1..=npp.min(n - 1) {
            let j = (i + off) % n;
            let (p, q) = (grid.points[i], grid.points[j]);
            if (p[0] - q[0]).hypot(p[1] - q[1]) < 1e-14 {
                return Err(Error::DegenerateGrid {
                    i: i.min(j),
                    j: i.max(j),
                });
            }
        }
    }
    Ok(())
}

/// Double-layer potential `Σ_j K(x, x_j) ω_j q_j` at an off-curve point.
pub fn dlp_potential(grid: &QuadratureGrid, density: &[f64], x: Point) -> f64 {
    grid.points
        .iter()
        .zip(&grid.normals)
        .zip(grid.weights.iter().zip(density))
        .map(|((&y, &n), (&w, &q))| dlp_kernel(x, y, n) * w * q)
        .sum()
}

/// Boundary trace of `log|x - x0|`, used as a right-hand side whose
/// interior solution is known in closed form when `x0` lies outside.
pub fn harmonic_trace(grid: &QuadratureGrid, source: Point) -> Vec<f64> {
    grid.points
        .iter()
        .map(|&p| log_distance(p, source))
        .collect()
}

pub fn log_distance(x: Point, y: Point) -> f64 {
    (x[0] - y[0]).hypot(x[1] - y[1]).ln()
}

/// Up to `count` points strictly inside the curve and at least half a
/// panel length away from it, where the plain Gauss rule evaluates the
/// double-layer potential accurately. Membership uses the Gauss identity:
/// the potential of the unit density is 1 inside and 0 outside.
pub fn interior_probe_points(grid: &QuadratureGrid, count: usize) -> Vec<Point> {
    let n = grid.len();
    if n == 0 || count == 0 {
        return vec![];
    }
    let centroid = {
        let total = grid.total_length();
        let mut c = [0.0, 0.0];
        for (p, w) in grid.points.iter().zip(&grid.weights) {
            c[0] += p[0] * w / total;
            c[1] += p[1] * w / total;
        }
        c
    };
    let panel_len = grid.panel_lengths();
    let ones = vec![1.0; n];
    let step = (n / (4 * count)).max(1);
    let mut candidates = Vec::new();
    for s in [0.3, 0.5, 0.15] {
        for i in (0..n).step_by(step) {
            let p = grid.points[i];
            candidates.push([
                centroid[0] + s * (p[0] - centroid[0]),
                centroid[1] + s * (p[1] - centroid[1]),
            ]);
        }
    }
    for scale in [2.0, 1.0, 0.6] {
        for i in (0..n).step_by(step) {
            let d = scale * panel_len[grid.panel_of[i]];
            let (p, nrm) = (grid.points[i], grid.normals[i]);
            candidates.push([p[0] - d * nrm[0], p[1] - d * nrm[1]]);
        }
    }
    let mut out: Vec<Point> = Vec::new();
    for c in candidates {
        if out.len() >= count {
            break;
        }
        let clear = grid
            .points
            .iter()
            .zip(&grid.panel_of)
            .all(|(p, &k)| (p[0] - c[0]).hypot(p[1] - c[1]) > 0.5 * panel_len[k]);
        if !clear || out.iter().any(|o| (o[0] - c[0]).hypot(o[1] - c[1]) < 1e-3) {
            continue;
        }
        if (dlp_potential(grid, &ones, c) - 1.0).abs() < 1e-3 {
            out.push(c);
        }
    }
    out
}
