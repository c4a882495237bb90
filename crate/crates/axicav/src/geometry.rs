//! Generating curves of axisymmetric surfaces, panelization with dyadic
//! corner refinement, local frames, and the half-space reflection maps.
//!
//! Every surface is described by a piecewise-smooth curve s -> (r(s), z(s))
//! in the meridian half-plane r >= 0. The cavity wall Gamma runs from the
//! symmetry axis to its rim in the plane z = 0, the buffer strip B continues
//! outward along z = 0 to radius 2, and the hemispherical interface C1 of
//! radius 2 closes the interior region. C2 is never meshed independently;
//! it is the reflection of C1 across z = 0.

use crate::error::{Error, Result};
use crate::quadrature::{gl10, PANEL_NODES};

/// Radius of the hemispherical interface and of the edge circle.
pub const DOME_RADIUS: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SurfaceLabel {
    /// Cavity wall below the conductor plane.
    Gamma,
    /// Annular buffer strip in the plane z = 0 between rim and edge circle.
    Buffer,
    /// Hemispherical interface of radius 2 above the plane.
    C1,
    /// Reflection of C1 (derived, never meshed on its own).
    C2,
    /// The circle r = 2, z = 0 where Buffer meets C1.
    Edge,
    /// Auxiliary closed surfaces used by oracles and tests.
    Free,
}

/// A smooth parameterized arc s in [0, 1] -> (r, z).
#[derive(Clone, Debug)]
pub enum Arc {
    Line { p0: [f64; 2], p1: [f64; 2] },
    /// (r, z) = center + radius (cos a, sin a), a = a0 + s (a1 - a0).
    Circle { center: [f64; 2], radius: f64, a0: f64, a1: f64 },
    /// Generating curve of the smooth flower-shaped cavity:
    /// r = [1 - 0.1 sin(6 pi s)] sin(pi s / 2), z = -[...] cos(pi s / 2).
    Flower,
}

impl Arc {
    pub fn point(&self, s: f64) -> [f64; 2] {
        match self {
            Arc::Line { p0, p1 } => [p0[0] + s * (p1[0] - p0[0]), p0[1] + s * (p1[1] - p0[1])],
            Arc::Circle { center, radius, a0, a1 } => {
                let a = a0 + s * (a1 - a0);
                [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            }
            Arc::Flower => {
                let b = 1.0 - 0.1 * (6.0 * std::f64::consts::PI * s).sin();
                let h = 0.5 * std::f64::consts::PI * s;
                [b * h.sin(), -b * h.cos()]
            }
        }
    }

    pub fn deriv(&self, s: f64) -> [f64; 2] {
        match self {
            Arc::Line { p0, p1 } => [p1[0] - p0[0], p1[1] - p0[1]],
            Arc::Circle { center: _, radius, a0, a1 } => {
                let da = a1 - a0;
                let a = a0 + s * da;
                [-radius * da * a.sin(), radius * da * a.cos()]
            }
            Arc::Flower => {
                let pi = std::f64::consts::PI;
                let b = 1.0 - 0.1 * (6.0 * pi * s).sin();
                let db = -0.6 * pi * (6.0 * pi * s).cos();
                let h = 0.5 * pi * s;
                let dh = 0.5 * pi;
                [db * h.sin() + b * dh * h.cos(), -(db * h.cos() - b * dh * h.sin())]
            }
        }
    }
}

/// Orientation rule fixing the direction of the unit normal
/// n = orient * (dz/ds, -dr/ds) / |g'|.
#[derive(Clone, Copy, Debug)]
pub enum NormalRule {
    /// Normal points into the region containing the probe point.
    TowardPoint([f64; 2]),
    /// Normal points away from the probe point.
    AwayFromPoint([f64; 2]),
    /// Normal is +e_z (flat strips in the conductor plane).
    PlusZ,
}

#[derive(Clone, Debug)]
pub struct GeneratingCurve {
    pub segments: Vec<Arc>,
    /// Sign applied to the raw normal (dz/ds, -dr/ds), one per curve.
    pub orient: f64,
    /// Closed curves (oracle surfaces) have no boundary circles.
    pub closed: bool,
}

/// Geometry specifications accepted by [`build_curve`].
#[derive(Clone, Debug)]
pub enum GeometrySpec {
    /// Cylindrical cavity of given depth and rim radius.
    Rect { depth: f64, radius: f64 },
    /// The smooth flower-shaped cavity.
    Flower,
    /// Open polyline from the axis to the rim.
    Polygon(Vec<[f64; 2]>),
    /// User-supplied arcs, traversed in order.
    Arcs(Vec<Arc>),
}

fn segment_bbox(arc: &Arc) -> [f64; 4] {
    let mut lo = [f64::MAX; 2];
    let mut hi = [f64::MIN; 2];
    for i in 0..=64 {
        let p = arc.point(i as f64 / 64.0);
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    [lo[0], lo[1], hi[0], hi[1]]
}

fn bboxes_overlap(a: &[f64; 4], b: &[f64; 4], eps: f64) -> bool {
    a[0] <= b[2] + eps && b[0] <= a[2] + eps && a[1] <= b[3] + eps && b[1] <= a[3] + eps
}

/// Builds the cavity generating curve from a specification, splitting at all
/// corners and validating the half-plane constraints.
pub fn build_curve(spec: &GeometrySpec) -> Result<GeneratingCurve> {
    let segments = match spec {
        GeometrySpec::Rect { depth, radius } => {
            if *depth <= 0.0 || *radius <= 0.0 {
                return Err(Error::InvalidGeometry("rect cavity needs positive depth and radius".into()));
            }
            vec![
                Arc::Line { p0: [0.0, -depth], p1: [*radius, -depth] },
                Arc::Line { p0: [*radius, -depth], p1: [*radius, 0.0] },
            ]
        }
        GeometrySpec::Flower => vec![Arc::Flower],
        GeometrySpec::Polygon(vs) => {
            if vs.len() < 2 {
                return Err(Error::InvalidGeometry("polygon needs at least two vertices".into()));
            }
            vs.windows(2).map(|w| Arc::Line { p0: w[0], p1: w[1] }).collect()
        }
        GeometrySpec::Arcs(arcs) => arcs.clone(),
    };
    // Half-plane and containment constraints.
    for (i, seg) in segments.iter().enumerate() {
        for j in 0..=64 {
            let p = seg.point(j as f64 / 64.0);
            if p[0] < -1e-12 {
                return Err(Error::InvalidGeometry(format!("segment {i} reaches r = {} < 0", p[0])));
            }
            let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
            if rho >= DOME_RADIUS - 1e-9 {
                return Err(Error::InvalidGeometry(format!(
                    "cavity point ({}, {}) does not fit under the radius-2 hemisphere",
                    p[0], p[1]
                )));
            }
        }
    }
    // Continuity at junctions.
    for w in segments.windows(2) {
        let a = w[0].point(1.0);
        let b = w[1].point(0.0);
        if ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() > 1e-12 {
            return Err(Error::InvalidGeometry("segments do not join continuously".into()));
        }
    }
    // Coarse self-intersection guard: bounding boxes of non-adjacent
    // segments must not overlap.
    let boxes: Vec<_> = segments.iter().map(segment_bbox).collect();
    for i in 0..segments.len() {
        for j in i + 2..segments.len() {
            if bboxes_overlap(&boxes[i], &boxes[j], -1e-9) {
                return Err(Error::InvalidGeometry(format!(
                    "bounding boxes of segments {i} and {j} overlap"
                )));
            }
        }
    }
    let mut curve = GeneratingCurve { segments, orient: 1.0, closed: false };
    // Cavity normals point into the interior void.
    let probe = cavity_interior_probe(&curve);
    curve.orient = orientation_sign(&curve, NormalRule::TowardPoint(probe));
    Ok(curve)
}

/// A point strictly inside the cavity cross-section, slightly below the
/// mouth near mid-radius.
fn cavity_interior_probe(curve: &GeneratingCurve) -> [f64; 2] {
    let rim = curve.segments.last().unwrap().point(1.0);
    let r_mid = 0.5 * rim[0];
    // Lowest wall height near r_mid bounds the probe depth.
    let mut z_wall: f64 = 0.0;
    for seg in &curve.segments {
        for i in 0..=128 {
            let p = seg.point(i as f64 / 128.0);
            if (p[0] - r_mid).abs() < 0.25 * rim[0].max(0.2) {
                z_wall = z_wall.min(p[1]);
            }
        }
    }
    [r_mid, 0.5 * z_wall.min(-1e-3)]
}

fn orientation_sign(curve: &GeneratingCurve, rule: NormalRule) -> f64 {
    // Evaluate at the mid-parameter of the mid segment.
    let seg = &curve.segments[curve.segments.len() / 2];
    let p = seg.point(0.5);
    let d = seg.deriv(0.5);
    let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
    let n_raw = [d[1] / len, -d[0] / len];
    match rule {
        NormalRule::PlusZ => {
            if n_raw[1] >= 0.0 {
                1.0
            } else {
                -1.0
            }
        }
        NormalRule::TowardPoint(q) | NormalRule::AwayFromPoint(q) => {
            let toward = (q[0] - p[0]) * n_raw[0] + (q[1] - p[1]) * n_raw[1] >= 0.0;
            let want_toward = matches!(rule, NormalRule::TowardPoint(_));
            if toward == want_toward {
                1.0
            } else {
                -1.0
            }
        }
    }
}

/// Quarter-circle generating arc of the hemispherical interface, from the
/// axis point (0, 2) to the edge point (2, 0); normals point away from the
/// origin (exterior with respect to the interior region).
pub fn hemisphere_curve() -> GeneratingCurve {
    let mut curve = GeneratingCurve {
        segments: vec![Arc::Circle {
            center: [0.0, 0.0],
            radius: DOME_RADIUS,
            a0: std::f64::consts::FRAC_PI_2,
            a1: 0.0,
        }],
        orient: 1.0,
        closed: false,
    };
    curve.orient = orientation_sign(&curve, NormalRule::AwayFromPoint([0.0, 0.0]));
    curve
}

/// Buffer strip from the cavity rim to the edge circle, normals +e_z.
pub fn buffer_curve(rim_radius: f64) -> Result<GeneratingCurve> {
    if !(rim_radius > 0.0 && rim_radius < DOME_RADIUS) {
        return Err(Error::InvalidGeometry(format!(
            "rim radius {rim_radius} must lie strictly between 0 and {DOME_RADIUS}"
        )));
    }
    let mut curve = GeneratingCurve {
        segments: vec![Arc::Line { p0: [rim_radius, 0.0], p1: [DOME_RADIUS, 0.0] }],
        orient: 1.0,
        closed: false,
    };
    curve.orient = orientation_sign(&curve, NormalRule::PlusZ);
    Ok(curve)
}

/// Closed circular generating curve (a torus), used by the 3D oracles.
pub fn torus_curve(center: [f64; 2], radius: f64) -> Result<GeneratingCurve> {
    if center[0] - radius <= 0.0 {
        return Err(Error::InvalidGeometry("torus must stay in r > 0".into()));
    }
    let mut curve = GeneratingCurve {
        segments: vec![Arc::Circle { center, radius, a0: 0.0, a1: crate::TWO_PI }],
        orient: 1.0,
        closed: true,
    };
    curve.orient = orientation_sign(&curve, NormalRule::AwayFromPoint([center[0], center[1]]));
    Ok(curve)
}

/// Local frame at a curve point: unit tangent and oriented unit normal.
#[derive(Clone, Copy, Debug)]
pub struct Frame {
    pub t: [f64; 2],
    pub n: [f64; 2],
}

/// One quadrature node of a panelized curve.
#[derive(Clone, Copy, Debug)]
pub struct Node {
    pub r: f64,
    pub z: f64,
    pub frame: Frame,
    /// Arclength quadrature weight: GL weight x |g'| x panel half-width.
    pub w: f64,
    /// Segment-local parameter of the node.
    pub s: f64,
    pub segment: usize,
    pub panel: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct Panel {
    pub segment: usize,
    pub s0: f64,
    pub s1: f64,
    pub level: u32,
    pub length: f64,
}

/// Panelized generating curve with 10 Gauss-Legendre nodes per panel.
#[derive(Clone, Debug)]
pub struct PanelMesh {
    pub label: SurfaceLabel,
    pub curve: GeneratingCurve,
    pub panels: Vec<Panel>,
    pub nodes: Vec<Node>,
}

/// Panelization controls.
#[derive(Clone, Copy, Debug)]
pub struct PanelizeOpts {
    /// Upper bound on base panel arclength.
    pub max_panel_len: f64,
    /// Dyadic refinement stops once the end panel is at most this long.
    pub eps_geom: f64,
    /// Node density target: panels sized for >= this many nodes/wavelength.
    pub nodes_per_wavelength: f64,
}

impl Default for PanelizeOpts {
    fn default() -> Self {
        PanelizeOpts { max_panel_len: 0.25, eps_geom: 1e-8, nodes_per_wavelength: 24.0 }
    }
}

fn arclength(seg: &Arc, s0: f64, s1: f64) -> f64 {
    // Composite GL10 over 8 subintervals resolves |g'| to near machine
    // precision for the analytic arcs used here.
    let gl = gl10();
    let nsub = 8;
    let mut total = 0.0;
    for i in 0..nsub {
        let a = s0 + (s1 - s0) * i as f64 / nsub as f64;
        let b = s0 + (s1 - s0) * (i + 1) as f64 / nsub as f64;
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            let d = seg.deriv(mid + half * x);
            total += w * half * (d[0] * d[0] + d[1] * d[1]).sqrt();
        }
    }
    total
}

/// Whether a curve endpoint meets the symmetry axis smoothly (no refinement
/// needed there: the revolved surface is regular, as for a flat disk center
/// or the top of the hemisphere). A cone point (dz/ds != 0 at r = 0) still
/// requires refinement.
fn smooth_axis_end(seg: &Arc, s: f64) -> bool {
    let p = seg.point(s);
    if p[0] > 1e-10 {
        return false;
    }
    let d = seg.deriv(s);
    let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
    (d[1] / len).abs() < 1e-9
}

/// Panelizes a curve: uniform base panels per segment sized for the
/// wavenumber, then dyadic refinement of end panels at corners and
/// junctions down to `eps_geom`.
pub fn panelize(curve: &GeneratingCurve, k: f64, opts: &PanelizeOpts, label: SurfaceLabel) -> PanelMesh {
    let keff = k.abs().max(1.0);
    let wavelength = crate::TWO_PI / keff;
    let target = (PANEL_NODES as f64 * wavelength / opts.nodes_per_wavelength).min(opts.max_panel_len);
    let nseg = curve.segments.len();
    let mut panels: Vec<Panel> = Vec::new();
    for (si, seg) in curve.segments.iter().enumerate() {
        let len = arclength(seg, 0.0, 1.0);
        let nbase = ((len / target) - 1e-9).ceil().max(2.0) as usize;
        let refine_start = if curve.closed {
            false
        } else if si > 0 {
            true
        } else {
            !smooth_axis_end(seg, 0.0)
        };
        let refine_end = if curve.closed {
            false
        } else if si + 1 < nseg {
            true
        } else {
            !smooth_axis_end(seg, 1.0)
        };
        let mut cuts: Vec<f64> = (0..=nbase).map(|i| i as f64 / nbase as f64).collect();
        let base_len = len / nbase as f64;
        let levels = if base_len > opts.eps_geom {
            ((base_len / opts.eps_geom).log2() - 1e-9).ceil().max(0.0) as u32
        } else {
            0
        };
        if refine_start {
            let mut splits = Vec::new();
            let mut frac = cuts[1];
            for _ in 0..levels {
                frac *= 0.5;
                splits.push(frac);
            }
            splits.reverse();
            cuts.splice(1..1, splits);
        }
        if refine_end {
            let last = *cuts.last().unwrap();
            let prev = cuts[cuts.len() - 2];
            let mut splits = Vec::new();
            let mut frac = last - prev;
            for _ in 0..levels {
                frac *= 0.5;
                splits.push(last - frac);
            }
            let at = cuts.len() - 1;
            cuts.splice(at..at, splits);
        }
        let base_frac = 1.0 / nbase as f64;
        for w in cuts.windows(2) {
            let l = ((w[1] - w[0]) / base_frac).log2();
            let level = (-l).max(0.0).round() as u32;
            panels.push(Panel {
                segment: si,
                s0: w[0],
                s1: w[1],
                level,
                length: arclength(seg, w[0], w[1]),
            });
        }
    }
    // Nodes.
    let gl = gl10();
    let mut nodes = Vec::with_capacity(panels.len() * PANEL_NODES);
    for (pi, p) in panels.iter().enumerate() {
        let seg = &curve.segments[p.segment];
        let half = 0.5 * (p.s1 - p.s0);
        let mid = 0.5 * (p.s0 + p.s1);
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            let s = mid + half * x;
            let pt = seg.point(s);
            let d = seg.deriv(s);
            let dlen = (d[0] * d[0] + d[1] * d[1]).sqrt();
            let t = [d[0] / dlen, d[1] / dlen];
            let n = [curve.orient * t[1], -curve.orient * t[0]];
            nodes.push(Node {
                r: pt[0],
                z: pt[1],
                frame: Frame { t, n },
                w: w * half * dlen,
                s,
                segment: p.segment,
                panel: pi,
            });
        }
    }
    PanelMesh { label, curve: curve.clone(), panels, nodes }
}

impl PanelMesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Reflection across z = 0: the image surface traversed with the same
    /// parameterization. Frames are the mirrored frames.
    pub fn reflected(&self, label: SurfaceLabel) -> PanelMesh {
        let mut out = self.clone();
        out.label = label;
        for seg in &mut out.curve.segments {
            *seg = reflect_arc(seg);
        }
        for node in &mut out.nodes {
            node.z = -node.z;
            node.frame.t[1] = -node.frame.t[1];
            node.frame.n[1] = -node.frame.n[1];
        }
        out
    }

    /// Endpoint data for the boundary circles of an open surface (skipping
    /// regular on-axis endpoints, which are not boundaries of the revolved
    /// surface).
    pub fn boundary_circles(&self) -> Vec<BoundaryCircle> {
        if self.curve.closed {
            return Vec::new();
        }
        let mut out = Vec::new();
        let first = &self.curve.segments[0];
        if first.point(0.0)[0] > 1e-10 {
            out.push(BoundaryCircle::at(first, 0.0, -1.0));
        }
        let last = self.curve.segments.last().unwrap();
        if last.point(1.0)[0] > 1e-10 {
            out.push(BoundaryCircle::at(last, 1.0, 1.0));
        }
        out
    }
}

/// A boundary circle of an open surface: the revolved curve endpoint. The
/// outward bi-normal there is b = tangent_sign * t (the tangent direction
/// continuing past the endpoint).
#[derive(Clone, Copy, Debug)]
pub struct BoundaryCircle {
    pub r: f64,
    pub z: f64,
    /// +1 at the far end of the curve, -1 at the start.
    pub tangent_sign: f64,
}

impl BoundaryCircle {
    fn at(seg: &Arc, s: f64, tangent_sign: f64) -> Self {
        let p = seg.point(s);
        BoundaryCircle { r: p[0], z: p[1], tangent_sign }
    }
}

fn reflect_arc(arc: &Arc) -> Arc {
    match arc {
        Arc::Line { p0, p1 } => Arc::Line { p0: [p0[0], -p0[1]], p1: [p1[0], -p1[1]] },
        Arc::Circle { center, radius, a0, a1 } => {
            Arc::Circle { center: [center[0], -center[1]], radius: *radius, a0: -a0, a1: -a1 }
        }
        Arc::Flower => unreachable!("the cavity curve is never reflected"),
    }
}

/// Mirror image of a point across the conductor plane.
pub fn reflect_point(p: [f64; 3]) -> [f64; 3] {
    [p[0], p[1], -p[2]]
}

/// Image of an electric current across the conductor plane.
pub fn reflect_electric(j: [f64; 3]) -> [f64; 3] {
    [-j[0], -j[1], j[2]]
}

/// Image of a magnetic current across the conductor plane.
pub fn reflect_magnetic(m: [f64; 3]) -> [f64; 3] {
    [m[0], m[1], -m[2]]
}
