//! End-to-end solve: compress, invert, reformat the inverse, apply.
//!
//! The inverse is applied through its standard HBS form, so the four timed
//! steps are exactly compress, invert, reformat and apply.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::compression::{
    compress_dense, compress_proxy, CompressionConfig, CompressionMode, ProxyKernel, ProxyScaling,
    SkeletonSet,
};
use crate::diagnostics::{estimate_solver_error, ErrorEstimate};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::hbs::HbsMatrix;
use crate::invert::{hbs_invert, inverse_to_hbs, HbsInverse, COND_WARNING};
use crate::quadrature::{
    assemble_dlp, dlp_potential, interior_probe_points, log_distance, DoubleLayerOperator,
    QuadratureGrid,
};
use crate::tree::build_tree;

/// Seconds, rounded to three significant digits.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub compress: f64,
    pub invert: f64,
    pub reformat: f64,
    pub apply: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxySettings {
    pub points: usize,
    pub radius_factor: f64,
    pub kernel: ProxyKernel,
    pub scaling: ProxyScaling,
}

/// Rank histogram of one tree level: rank -> number of nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRanks {
    pub level: usize,
    pub row: BTreeMap<usize, usize>,
    pub col: BTreeMap<usize, usize>,
    pub max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conditioning {
    /// Largest condition number over all inverted blocks.
    pub max: f64,
    /// Condition number of the top-level coupled block.
    pub root: f64,
    /// Largest condition number per level, leaves last.
    pub per_level: Vec<f64>,
    pub warning_threshold: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicCheck {
    pub source: Point,
    pub points: usize,
    pub max_abs_error: f64,
    /// `max_abs_error` over the largest exact value at the probes.
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub n: usize,
    pub levels: usize,
    pub target_leaf: usize,
    pub mode: CompressionMode,
    pub tol: f64,
    pub symmetrize: bool,
    pub proxy: Option<ProxySettings>,
    pub max_rank: usize,
    pub stored_reals: usize,
    pub ranks: Vec<LevelRanks>,
    pub timings: Timings,
    pub conditioning: Conditioning,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_estimate: Option<ErrorEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub harmonic_check: Option<HarmonicCheck>,
}

/// Compressed matrix, its inverse in both forms, and the running report.
pub struct Solver {
    pub matrix: HbsMatrix,
    pub skeletons: SkeletonSet,
    pub inverse: HbsInverse,
    pub inverse_matrix: HbsMatrix,
    pub report: SolveReport,
}

impl Solver {
    pub fn build(grid: &QuadratureGrid, cfg: &CompressionConfig) -> Result<Self> {
        cfg.validate()?;
        let tree = build_tree(grid.len(), cfg.target_leaf)?;
        let t = Instant::now();
        let (matrix, skeletons) = match cfg.mode {
            CompressionMode::Dense => {
                if grid.len() > cfg.dense_limit {
                    return Err(Error::DenseLimit {
                        n: grid.len(),
                        limit: cfg.dense_limit,
                    });
                }
                compress_dense(&assemble_dlp(grid)?, &tree, cfg)?
            }
            CompressionMode::Proxy => {
                compress_proxy(grid, &DoubleLayerOperator::new(grid)?, &tree, cfg)?
            }
        };
        let compress = seconds(t);
        let t = Instant::now();
        let inverse = hbs_invert(&matrix)?;
        let invert = seconds(t);
        let t = Instant::now();
        let inverse_matrix = inverse_to_hbs(&inverse);
        let reformat = seconds(t);

        let report = SolveReport {
            n: grid.len(),
            levels: tree.levels(),
            target_leaf: cfg.target_leaf,
            mode: cfg.mode,
            tol: cfg.tol,
            symmetrize: cfg.symmetrize,
            proxy: (cfg.mode == CompressionMode::Proxy).then_some(ProxySettings {
                points: cfg.proxy_points,
                radius_factor: cfg.proxy_radius_factor,
                kernel: cfg.proxy_kernel,
                scaling: cfg.proxy_scaling,
            }),
            max_rank: matrix.max_rank(),
            stored_reals: matrix.stored_reals(),
            ranks: rank_histograms(&matrix),
            timings: Timings {
                compress,
                invert,
                reformat,
                apply: 0.0,
            },
            conditioning: conditioning(&inverse),
            error_estimate: None,
            harmonic_check: None,
        };
        Ok(Self {
            matrix,
            skeletons,
            inverse,
            inverse_matrix,
            report,
        })
    }

    /// Applies the inverse; the report keeps the time of the latest call.
    pub fn solve(&mut self, rhs: &[f64]) -> Result<Vec<f64>> {
        let t = Instant::now();
        let q = self.inverse_matrix.matvec(rhs)?;
        self.report.timings.apply = seconds(t);
        Ok(q)
    }

    /// Power-iteration error estimates against the uncompressed operator,
    /// whose matvec costs `O(N²)`; refused above the dense limit.
    pub fn estimate_errors(
        &mut self,
        grid: &QuadratureGrid,
        dense_limit: usize,
        iters: usize,
        seed: u64,
    ) -> Result<ErrorEstimate> {
        if grid.len() > dense_limit {
            return Err(Error::DenseLimit {
                n: grid.len(),
                limit: dense_limit,
            });
        }
        let op = DoubleLayerOperator::new(grid)?;
        let est = estimate_solver_error(&op, &self.matrix, &self.inverse, iters, seed)?;
        self.report.error_estimate = Some(est);
        Ok(est)
    }
}

pub fn solve_workflow(
    grid: &QuadratureGrid,
    cfg: &CompressionConfig,
    rhs: &[f64],
) -> Result<(Vec<f64>, SolveReport)> {
    if rhs.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: rhs.len(),
        });
    }
    let mut s = Solver::build(grid, cfg)?;
    let q = s.solve(rhs)?;
    Ok((q, s.report))
}

/// Compares the double-layer potential of `density` with `log|x − source|`
/// at up to `count` interior points. Meaningful when the density solves the
/// system with the boundary trace of that function and `source` is outside.
pub fn harmonic_check(
    grid: &QuadratureGrid,
    density: &[f64],
    source: Point,
    count: usize,
) -> HarmonicCheck {
    let pts = interior_probe_points(grid, count);
    let mut err = 0.0f64;
    let mut scale = 0.0f64;
    for &p in &pts {
        let exact = log_distance(p, source);
        err = err.max((dlp_potential(grid, density, p) - exact).abs());
        scale = scale.max(exact.abs());
    }
    HarmonicCheck {
        source,
        points: pts.len(),
        max_abs_error: err,
        max_rel_error: if scale > 0.0 { err / scale } else { err },
    }
}

fn seconds(start: Instant) -> f64 {
    let x = start.elapsed().as_secs_f64();
    format!("{x:.2e}").parse().unwrap_or(x)
}

fn rank_histograms(a: &HbsMatrix) -> Vec<LevelRanks> {
    (1..=a.tree().levels())
        .map(|level| {
            let mut row = BTreeMap::new();
            let mut col = BTreeMap::new();
            let mut max = 0;
            for (r, c) in a.level_ranks(level) {
                *row.entry(r).or_insert(0) += 1;
                *col.entry(c).or_insert(0) += 1;
                max = max.max(r).max(c);
            }
            LevelRanks {
                level,
                row,
                col,
                max,
            }
        })
        .collect()
}

fn conditioning(inv: &HbsInverse) -> Conditioning {
    let tel = inv.telemetry();
    let mut per_level = vec![0.0f64; inv.tree().levels() + 1];
    per_level[0] = tel.root;
    for c in &tel.nodes {
        per_level[c.level] = per_level[c.level].max(c.dtilde).max(c.dhat);
    }
    Conditioning {
        max: tel.max_condition(),
        root: tel.root,
        per_level,
        warning_threshold: COND_WARNING,
        warnings: tel.warnings.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{decompose, make_contour, ContourKind};
    use crate::quadrature::{build_grid, harmonic_trace};

    fn star(ppu: usize) -> QuadratureGrid {
        let c = make_contour(ContourKind::smooth_star()).unwrap();
        build_grid(&c, &decompose(&c, ppu, 0).unwrap(), 10).unwrap()
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = star(30);
        let (q, rep) =
            solve_workflow(&g, &CompressionConfig::default(), &vec![0.0; g.len()]).unwrap();
        assert!(q.iter().all(|&v| v == 0.0));
        assert_eq!(rep.n, 300);
    }

    #[test]
    fn harmonic_reproduction_and_report() {
        let g = star(80);
        let src = [3.0, 0.0];
        let (q, rep) =
            solve_workflow(&g, &CompressionConfig::default(), &harmonic_trace(&g, src)).unwrap();
        let chk = harmonic_check(&g, &q, src, 10);
        assert_eq!(chk.points, 10);
        assert!(chk.max_rel_error < 1e-8, "{chk:?}");
        assert_eq!(rep.ranks.len(), rep.levels);
        let total: usize = rep.ranks.last().unwrap().row.values().sum();
        assert_eq!(total, 1 << rep.levels);
        assert!(rep.proxy.is_some());
        let json = serde_json::to_value(&rep).unwrap();
        for key in ["timings", "ranks", "conditioning", "proxy"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn error_estimate_is_small_and_capped() {
        let g = star(64);
        let mut s = Solver::build(&g, &CompressionConfig::default()).unwrap();
        let est = s.estimate_errors(&g, 8000, 20, 0).unwrap();
        assert!(est.err_a < 1e-8, "{est:?}");
        assert!(est.norm_inv > 0.5);
        assert!(s.report.error_estimate.is_some());
        assert!(matches!(
            s.estimate_errors(&g, 100, 20, 0),
            Err(Error::DenseLimit { .. })
        ));
    }

    #[test]
    fn rhs_length_checked() {
        let g = star(20);
        assert!(solve_workflow(&g, &CompressionConfig::default(), &[1.0]).is_err());
    }
}
