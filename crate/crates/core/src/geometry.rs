//! Parametric closed contours and their panel decompositions.
//!
//! Every contour is parameterized counterclockwise over `[0, T)`, so the
//! outward normal is the tangent rotated clockwise. Curves with tangent
//! discontinuities are split into smooth pieces whose endpoints are the
//! corner parameters; panels never straddle a corner.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shortest admissible panel, measured in the curve parameter.
pub const MIN_PANEL_LENGTH: f64 = 1e-12;

/// Default number of dyadic refinement levels toward each corner.
pub const DEFAULT_CORNER_LEVELS: usize = 5;

pub type Point = [f64; 2];

/// Shape description, as it appears in a geometry spec file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ContourKind {
    UnitCircle {
        #[serde(default = "defaults::radius")]
        radius: f64,
    },
    /// `r(t) = 1 + amplitude * cos(arms * t)`.
    SmoothStar {
        #[serde(default = "defaults::arms")]
        arms: u32,
        #[serde(default = "defaults::star_amplitude")]
        amplitude: f64,
    },
    /// Circular arcs joining vertices that alternate between two radii.
    /// `bulge` holds sagitta/chord ratios, cycled over the segments.
    CornerStar {
        #[serde(default = "defaults::segments")]
        segments: u32,
        #[serde(default = "defaults::inner_radius")]
        inner_radius: f64,
        #[serde(default = "defaults::outer_radius")]
        outer_radius: f64,
        #[serde(default = "defaults::bulge")]
        bulge: Vec<f64>,
    },
    /// Two sine waves `gap` apart, joined by vertical segments.
    Snake {
        #[serde(default = "defaults::waves")]
        waves: u32,
        #[serde(default = "defaults::snake_amplitude")]
        amplitude: f64,
        #[serde(default = "defaults::gap")]
        gap: f64,
        #[serde(default = "defaults::wavelength")]
        wavelength: f64,
        #[serde(default = "defaults::line_panels")]
        line_panels: usize,
    },
}

mod defaults {
    pub fn radius() -> f64 {
        1.0
    }
    pub fn arms() -> u32 {
        5
    }
    pub fn star_amplitude() -> f64 {
        0.3
    }
    pub fn segments() -> u32 {
        10
    }
    pub fn inner_radius() -> f64 {
        0.7
    }
    pub fn outer_radius() -> f64 {
        1.3
    }
    pub fn bulge() -> Vec<f64> {
        vec![0.1, 0.2]
    }
    pub fn waves() -> u32 {
        2
    }
    pub fn snake_amplitude() -> f64 {
        1.0
    }
    pub fn gap() -> f64 {
        0.2
    }
    pub fn wavelength() -> f64 {
        2.0 * std::f64::consts::PI
    }
    pub fn line_panels() -> usize {
        4
    }
}

impl ContourKind {
    pub fn unit_circle() -> Self {
        ContourKind::UnitCircle { radius: 1.0 }
    }

    pub fn smooth_star() -> Self {
        ContourKind::SmoothStar {
            arms: defaults::arms(),
            amplitude: defaults::star_amplitude(),
        }
    }

    pub fn corner_star() -> Self {
        ContourKind::CornerStar {
            segments: defaults::segments(),
            inner_radius: defaults::inner_radius(),
            outer_radius: defaults::outer_radius(),
            bulge: defaults::bulge(),
        }
    }

    pub fn snake(waves: u32) -> Self {
        ContourKind::Snake {
            waves,
            amplitude: defaults::snake_amplitude(),
            gap: defaults::gap(),
            wavelength: defaults::wavelength(),
            line_panels: defaults::line_panels(),
        }
    }
}

/// Position and first two parameter derivatives at one parameter value.
#[derive(Clone, Copy, Debug)]
pub struct CurvePoint {
    pub position: Point,
    pub d1: Point,
    pub d2: Point,
}

impl CurvePoint {
    pub fn speed(&self) -> f64 {
        self.d1[0].hypot(self.d1[1])
    }

    pub fn outward_normal(&self) -> Point {
        let s = self.speed();
        [self.d1[1] / s, -self.d1[0] / s]
    }

    /// Signed curvature; positive where the curve bends toward the interior.
    pub fn curvature(&self) -> f64 {
        let s = self.speed();
        (self.d1[0] * self.d2[1] - self.d1[1] * self.d2[0]) / (s * s * s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum PanelRule {
    /// Panels = round(units * panels_per_unit), at least one.
    PerUnit(f64),
    Fixed(usize),
}

/// A smooth stretch of the curve between consecutive corners.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    pub corner_at_start: bool,
    pub corner_at_end: bool,
    rule: PanelRule,
}

impl Piece {
    fn base_panels(&self, panels_per_unit: usize) -> usize {
        match self.rule {
            PanelRule::PerUnit(units) => ((units * panels_per_unit as f64).round() as usize).max(1),
            PanelRule::Fixed(n) => n,
        }
    }
}

#[derive(Clone, Debug)]
struct Arc {
    center: Point,
    radius: f64,
    theta0: f64,
    sweep: f64,
}

#[derive(Clone, Debug)]
pub struct Contour {
    kind: ContourKind,
    period: f64,
    corners: Vec<f64>,
    pieces: Vec<Piece>,
    arcs: Vec<Arc>,
}

/// Builds a contour, rejecting parameter sets that do not describe a simple closed curve.
pub fn make_contour(kind: ContourKind) -> Result<Contour> {
    let invalid = |msg: String| Err(Error::InvalidGeometry(msg));
    let smooth_piece = |period: f64| Piece {
        start: 0.0,
        end: period,
        corner_at_start: false,
        corner_at_end: false,
        rule: PanelRule::PerUnit(1.0),
    };
    match &kind {
        ContourKind::UnitCircle { radius } => {
            if !(*radius > 0.0 && radius.is_finite()) {
                return invalid(format!("circle radius must be positive, got {radius}"));
            }
            Ok(Contour {
                kind,
                period: 2.0 * PI,
                corners: vec![],
                pieces: vec![smooth_piece(2.0 * PI)],
                arcs: vec![],
            })
        }
        ContourKind::SmoothStar { arms, amplitude } => {
            if *arms == 0 {
                return invalid("star needs at least one arm".into());
            }
            if amplitude.is_nan() || amplitude.abs() >= 1.0 {
                return invalid(format!(
                    "star amplitude must lie in (-1, 1), got {amplitude}"
                ));
            }
            Ok(Contour {
                kind,
                period: 2.0 * PI,
                corners: vec![],
                pieces: vec![smooth_piece(2.0 * PI)],
                arcs: vec![],
            })
        }
        ContourKind::CornerStar {
            segments,
            inner_radius,
            outer_radius,
            bulge,
        } => {
            let s = *segments as usize;
            if s < 4 || !s.is_multiple_of(2) {
                return invalid(format!(
                    "corner star needs an even segment count >= 4, got {s}"
                ));
            }
            if !(*inner_radius > 0.0 && *outer_radius > 0.0) {
                return invalid("corner star radii must be positive".into());
            }
            if bulge.is_empty() || bulge.iter().any(|b| !(*b > 0.0 && *b < 0.5)) {
                return invalid("bulge ratios must lie in (0, 0.5)".into());
            }
            let vertex = |i: usize| {
                let r = if i.is_multiple_of(2) {
                    *inner_radius
                } else {
                    *outer_radius
                };
                let a = 2.0 * PI * (i % s) as f64 / s as f64;
                [r * a.cos(), r * a.sin()]
            };
            let arcs = (0..s)
                .map(|i| {
                    let p = vertex(i);
                    let q = vertex(i + 1);
                    let chord = [q[0] - p[0], q[1] - p[1]];
                    let len = chord[0].hypot(chord[1]);
                    let nu = [chord[1] / len, -chord[0] / len];
                    let h = bulge[i % bulge.len()] * len;
                    let radius = (0.25 * len * len + h * h) / (2.0 * h);
                    let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
                    let center = [mid[0] - (radius - h) * nu[0], mid[1] - (radius - h) * nu[1]];
                    Arc {
                        center,
                        radius,
                        theta0: (p[1] - center[1]).atan2(p[0] - center[0]),
                        sweep: 2.0 * (0.5 * len / radius).asin(),
                    }
                })
                .collect();
            let pieces = (0..s)
                .map(|i| Piece {
                    start: i as f64,
                    end: (i + 1) as f64,
                    corner_at_start: true,
                    corner_at_end: true,
                    rule: PanelRule::PerUnit(1.0),
                })
                .collect();
            Ok(Contour {
                kind,
                period: s as f64,
                corners: (0..s).map(|i| i as f64).collect(),
                pieces,
                arcs,
            })
        }
        ContourKind::Snake {
            waves,
            amplitude,
            gap,
            wavelength,
            line_panels,
        } => {
            if *waves < 1 {
                return invalid("snake needs at least one wave".into());
            }
            if !(*gap > 0.0 && *wavelength > 0.0 && amplitude.is_finite()) {
                return invalid("snake gap and wavelength must be positive".into());
            }
            if *line_panels < 1 {
                return invalid("snake end segments need at least one panel".into());
            }
            let w = *waves as f64 * wavelength;
            let g = *gap;
            let bounds = [0.0, w, w + g, 2.0 * w + g, 2.0 * w + 2.0 * g];
            let rules = [
                PanelRule::PerUnit(*waves as f64),
                PanelRule::Fixed(*line_panels),
                PanelRule::PerUnit(*waves as f64),
                PanelRule::Fixed(*line_panels),
            ];
            let pieces = (0..4)
                .map(|i| Piece {
                    start: bounds[i],
                    end: bounds[i + 1],
                    corner_at_start: true,
                    corner_at_end: true,
                    rule: rules[i],
                })
                .collect();
            Ok(Contour {
                kind,
                period: bounds[4],
                corners: bounds[..4].to_vec(),
                pieces,
                arcs: vec![],
            })
        }
    }
}

impl Contour {
    pub fn kind(&self) -> &ContourKind {
        &self.kind
    }

    /// Parameter period `T`.
    pub fn period(&self) -> f64 {
        self.period
    }

    /// Parameter values at which the tangent is discontinuous.
    pub fn corner_locations(&self) -> &[f64] {
        &self.corners
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Evaluates the curve at `t`, reduced modulo the period. At a corner
    /// the derivatives are those of the piece that starts there.
    pub fn eval(&self, t: f64) -> CurvePoint {
        let t = t.rem_euclid(self.period);
        match &self.kind {
            ContourKind::UnitCircle { radius } => {
                let (s, c) = t.sin_cos();
                CurvePoint {
                    position: [radius * c, radius * s],
                    d1: [-radius * s, radius * c],
                    d2: [-radius * c, -radius * s],
                }
            }
            ContourKind::SmoothStar { arms, amplitude } => {
                let m = *arms as f64;
                let (s, c) = t.sin_cos();
                let (sm, cm) = (m * t).sin_cos();
                let r = 1.0 + amplitude * cm;
                let r1 = -amplitude * m * sm;
                let r2 = -amplitude * m * m * cm;
                CurvePoint {
                    position: [r * c, r * s],
                    d1: [r1 * c - r * s, r1 * s + r * c],
                    d2: [r2 * c - 2.0 * r1 * s - r * c, r2 * s + 2.0 * r1 * c - r * s],
                }
            }
            ContourKind::CornerStar { .. } => {
                let i = (t.floor() as usize).min(self.arcs.len() - 1);
                let arc = &self.arcs[i];
                let theta = arc.theta0 + arc.sweep * (t - i as f64);
                let (s, c) = theta.sin_cos();
                let (r, w) = (arc.radius, arc.sweep);
                CurvePoint {
                    position: [arc.center[0] + r * c, arc.center[1] + r * s],
                    d1: [-r * w * s, r * w * c],
                    d2: [-r * w * w * c, -r * w * w * s],
                }
            }
            ContourKind::Snake {
                amplitude,
                gap,
                wavelength,
                waves,
                ..
            } => {
                let k = 2.0 * PI / wavelength;
                let w = *waves as f64 * wavelength;
                let g = *gap;
                let a = *amplitude;
                if t < w {
                    let (s, c) = (k * t).sin_cos();
                    CurvePoint {
                        position: [t, a * s],
                        d1: [1.0, a * k * c],
                        d2: [0.0, -a * k * k * s],
                    }
                } else if t < w + g {
                    CurvePoint {
                        position: [w, a * (k * w).sin() + (t - w)],
                        d1: [0.0, 1.0],
                        d2: [0.0, 0.0],
                    }
                } else if t < 2.0 * w + g {
                    let x = 2.0 * w + g - t;
                    let (s, c) = (k * x).sin_cos();
                    CurvePoint {
                        position: [x, a * s + g],
                        d1: [-1.0, -a * k * c],
                        d2: [0.0, -a * k * k * s],
                    }
                } else {
                    CurvePoint {
                        position: [0.0, g - (t - 2.0 * w - g)],
                        d1: [0.0, -1.0],
                        d2: [0.0, 0.0],
                    }
                }
            }
        }
    }

    pub fn position(&self, t: f64) -> Point {
        self.eval(t).position
    }
}

/// Ordered panels tiling `[0, T)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PanelDecomposition {
    pub panels: Vec<(f64, f64)>,
    /// Refinement levels applied at each corner, in `corner_locations` order.
    pub refinement_levels: Vec<usize>,
}

impl PanelDecomposition {
    pub fn len(&self) -> usize {
        self.panels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }
}

/// Splits each smooth piece into near-uniform panels, then grades the panels
/// touching a corner dyadically (`corner_levels` halvings toward the corner).
pub fn decompose(
    contour: &Contour,
    panels_per_unit: usize,
    corner_levels: usize,
) -> Result<PanelDecomposition> {
    if panels_per_unit < 1 {
        return Err(Error::InvalidArgument(
            "panels_per_unit must be >= 1".into(),
        ));
    }
    let mut panels = Vec::new();
    for piece in contour.pieces() {
        let mut m = piece.base_panels(panels_per_unit);
        let grade_start = piece.corner_at_start && corner_levels > 0;
        let grade_end = piece.corner_at_end && corner_levels > 0;
        if m == 1 && grade_start && grade_end {
            m = 2;
        }
        let len = piece.end - piece.start;
        let mut ends: Vec<f64> = (0..=m)
            .map(|i| match i {
                0 => piece.start,
                i if i == m => piece.end,
                i => piece.start + len * i as f64 / m as f64,
            })
            .collect();
        if grade_start {
            let (a, b) = (ends[0], ends[1]);
            let h = b - a;
            let inner: Vec<f64> = (1..=corner_levels)
                .rev()
                .map(|j| a + h / f64::powi(2.0, j as i32))
                .collect();
            ends.splice(1..1, inner);
        }
        if grade_end {
            let n = ends.len();
            let (a, b) = (ends[n - 2], ends[n - 1]);
            let h = b - a;
            let inner: Vec<f64> = (1..=corner_levels)
                .map(|j| b - h / f64::powi(2.0, j as i32))
                .collect();
            ends.splice(n - 1..n - 1, inner);
        }
        for w in ends.windows(2) {
            let length = w[1] - w[0];
            if length < MIN_PANEL_LENGTH {
                return Err(Error::ExcessiveGrading { length, at: w[0] });
            }
            panels.push((w[0], w[1]));
        }
    }
    Ok(PanelDecomposition {
        panels,
        refinement_levels: vec![corner_levels; contour.corner_locations().len()],
    })
}

/// Contents of a geometry spec file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    #[serde(flatten)]
    pub contour: ContourKind,
    pub panels_per_unit: usize,
    #[serde(default = "default_corner_levels")]
    pub corner_levels: usize,
}

fn default_corner_levels() -> usize {
    DEFAULT_CORNER_LEVELS
}

impl GeometrySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre;

    fn all_kinds() -> Vec<ContourKind> {
        vec![
            ContourKind::unit_circle(),
            ContourKind::smooth_star(),
            ContourKind::corner_star(),
            ContourKind::snake(2),
        ]
    }

    fn dist(a: Point, b: Point) -> f64 {
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    #[test]
    fn circle_matches_closed_form() {
        let c = make_contour(ContourKind::unit_circle()).unwrap();
        assert_eq!(c.period(), 2.0 * PI);
        for &t in &[0.0, 0.3, 2.0, 5.5] {
            let p = c.eval(t);
            assert!(dist(p.position, [t.cos(), t.sin()]) < 1e-15);
            assert!(dist(p.outward_normal(), [t.cos(), t.sin()]) < 1e-15);
            assert!((p.curvature() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn closure_and_unit_normals() {
        for kind in all_kinds() {
            let c = make_contour(kind.clone()).unwrap();
            let a = c.position(0.0);
            let b = c.position(c.period() * (1.0 - 1e-16));
            assert!(dist(a, b) < 1e-12, "{kind:?} not closed: {a:?} vs {b:?}");
            for i in 0..200 {
                let t = c.period() * (i as f64 + 0.37) / 200.0;
                let n = c.eval(t).outward_normal();
                assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn pieces_join_continuously() {
        for kind in all_kinds() {
            let c = make_contour(kind).unwrap();
            for p in c.pieces() {
                let before = c.position(p.end - 1e-13);
                let after = c.position(p.end);
                assert!(dist(before, after) < 1e-10);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for kind in all_kinds() {
            let c = make_contour(kind.clone()).unwrap();
            for p in c.pieces() {
                let t = p.start + 0.37 * (p.end - p.start);
                let e = c.eval(t);
                let (m, q) = (c.eval(t - h), c.eval(t + h));
                for k in 0..2 {
                    let d1 = (q.position[k] - m.position[k]) / (2.0 * h);
                    let d2 = (q.position[k] - 2.0 * e.position[k] + m.position[k]) / (h * h);
                    assert!((d1 - e.d1[k]).abs() < 1e-7, "{kind:?} d1");
                    assert!((d2 - e.d2[k]).abs() < 1e-3, "{kind:?} d2");
                }
            }
        }
    }

    #[test]
    fn normals_point_outward() {
        // Signed area > 0 for a counterclockwise parameterization.
        for kind in all_kinds() {
            let c = make_contour(kind.clone()).unwrap();
            let n = 20000;
            let dt = c.period() / n as f64;
            let area: f64 = (0..n)
                .map(|i| {
                    let p = c.eval((i as f64 + 0.5) * dt);
                    0.5 * (p.position[0] * p.d1[1] - p.position[1] * p.d1[0]) * dt
                })
                .sum();
            assert!(area > 0.0, "{kind:?} is clockwise");
        }
    }

    #[test]
    fn snake_shape() {
        let c = make_contour(ContourKind::snake(2)).unwrap();
        let t = 1.3;
        let lower = c.position(t);
        let w = 4.0 * PI;
        let upper = c.position(2.0 * w + 0.2 - t);
        assert!((lower[0] - upper[0]).abs() < 1e-14);
        assert!((upper[1] - lower[1] - 0.2).abs() < 1e-14);
        assert!((lower[1] - t.sin()).abs() < 1e-15);
        assert_eq!(c.corner_locations().len(), 4);
    }

    #[test]
    fn corner_star_has_ten_junctions() {
        let c = make_contour(ContourKind::corner_star()).unwrap();
        assert_eq!(c.corner_locations().len(), 10);
        for i in 0..10usize {
            let a = 2.0 * PI * i as f64 / 10.0;
            let r = if i.is_multiple_of(2) { 0.7 } else { 1.3 };
            let p = c.position(i as f64);
            assert!(dist(p, [r * a.cos(), r * a.sin()]) < 1e-12);
            // Tangent jumps at the junction.
            let left = c
                .eval(i as f64 - 1e-9 + if i == 0 { 10.0 } else { 0.0 })
                .outward_normal();
            let right = c.eval(i as f64).outward_normal();
            assert!(dist(left, right) > 1e-2);
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(make_contour(ContourKind::UnitCircle { radius: -1.0 }).is_err());
        assert!(make_contour(ContourKind::Snake {
            waves: 0,
            amplitude: 1.0,
            gap: 0.2,
            wavelength: 1.0,
            line_panels: 4
        })
        .is_err());
        assert!(make_contour(ContourKind::CornerStar {
            segments: 10,
            inner_radius: 0.0,
            outer_radius: 1.3,
            bulge: vec![0.1]
        })
        .is_err());
        assert!(make_contour(ContourKind::SmoothStar {
            arms: 5,
            amplitude: 1.5
        })
        .is_err());
    }

    #[test]
    fn uniform_circle_panels() {
        let c = make_contour(ContourKind::unit_circle()).unwrap();
        let d = decompose(&c, 16, 0).unwrap();
        assert_eq!(d.len(), 16);
        for (a, b) in &d.panels {
            assert!((b - a - 2.0 * PI / 16.0).abs() < 1e-14);
        }
    }

    #[test]
    fn corner_star_grading() {
        let c = make_contour(ContourKind::corner_star()).unwrap();
        let d = decompose(&c, 6, 5).unwrap();
        assert_eq!(d.len(), 10 * (6 + 2 * 5));
        // Segment 0 starts at a corner: the two finest panels match, then
        // lengths double away from it.
        let lens: Vec<f64> = d.panels[..7].iter().map(|(a, b)| b - a).collect();
        assert!((lens[0] - lens[1]).abs() < 1e-15);
        for w in lens[1..].windows(2) {
            assert!((w[0] / w[1] - 0.5).abs() < 1e-12, "{lens:?}");
        }
        for &t in c.corner_locations() {
            assert!(d.panels.iter().any(|&(a, _)| a == t));
        }
    }

    #[test]
    fn snake_panel_count() {
        let c = make_contour(ContourKind::snake(2)).unwrap();
        let d = decompose(&c, 10, 4).unwrap();
        // Each of the 4 corners grades both adjacent pieces.
        assert_eq!(d.len(), 10 * 2 * 2 + 2 * 4 + 4 * 2 * 4);
        assert_eq!(d.refinement_levels, vec![4; 4]);
    }

    #[test]
    fn panels_tile_the_period() {
        for kind in all_kinds() {
            let c = make_contour(kind).unwrap();
            let d = decompose(&c, 3, 3).unwrap();
            assert_eq!(d.panels[0].0, 0.0);
            assert_eq!(d.panels.last().unwrap().1, c.period());
            for w in d.panels.windows(2) {
                assert_eq!(w[0].1, w[1].0);
            }
        }
    }

    #[test]
    fn excessive_grading_is_rejected() {
        let c = make_contour(ContourKind::corner_star()).unwrap();
        assert!(matches!(
            decompose(&c, 6, 60),
            Err(Error::ExcessiveGrading { .. })
        ));
    }

    #[test]
    fn circle_arc_length_from_gauss_nodes() {
        let c = make_contour(ContourKind::unit_circle()).unwrap();
        let (x, w) = gauss_legendre(10).unwrap();
        for &panels in &[1usize, 4, 7] {
            let d = decompose(&c, panels, 0).unwrap();
            let len: f64 = d
                .panels
                .iter()
                .flat_map(|&(a, b)| {
                    let c = &c;
                    x.iter().zip(&w).map(move |(xi, wi)| {
                        let t = 0.5 * (a + b) + 0.5 * (b - a) * xi;
                        wi * 0.5 * (b - a) * c.eval(t).speed()
                    })
                })
                .sum();
            assert!((len - 2.0 * PI).abs() < 1e-10);
        }
    }

    #[test]
    fn spec_file_parses() {
        let s = r#"{"kind": "snake", "params": {"waves": 3}, "panels_per_unit": 10, "corner_levels": 4}"#;
        let g = GeometrySpec::from_json(s).unwrap();
        assert_eq!(g.panels_per_unit, 10);
        assert_eq!(g.corner_levels, 4);
        match g.contour {
            ContourKind::Snake { waves, gap, .. } => {
                assert_eq!(waves, 3);
                assert_eq!(gap, 0.2);
            }
            _ => panic!(),
        }
        let c = r#"{"kind": "unit_circle", "params": {}, "panels_per_unit": 16}"#;
        let g = GeometrySpec::from_json(c).unwrap();
        assert_eq!(g.corner_levels, DEFAULT_CORNER_LEVELS);
    }
}
