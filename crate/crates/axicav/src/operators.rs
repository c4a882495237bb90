//! Dense modal operator matrices between surfaces.
//!
//! Assembly walks (target, source-panel) pairs once per mode and fills every
//! requested operator block from the same azimuthal kernel integrals. Three
//! quadrature pathways:
//!
//! * smooth: Nyström weights at the source nodes (well-separated pairs),
//! * near: adaptive integration in the source parameter against the panel's
//!   Legendre basis (target closer than `near_factor` panel lengths),
//! * self: generalized Gaussian log-quadrature when the target node lies on
//!   the source panel (weakly singular trace kernels only).
//!
//! Mirror-image contributions are assembled as a second pass over the
//! reflected mesh and combined with the current-type sign by the caller
//! (or by [`assemble_with_image`]).

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::geometry::{PanelMesh, SurfaceLabel};
use crate::kernels::{integrate_ops, stack_len, AzimuthalCtl, OpKind, SourceGeom, TargetGeom};
use crate::linalg::CMat;
use crate::quadrature::{legendre_p_and_dp, panel_basis, SingularRule, PANEL_NODES};

/// Sign applied to the reflected-mesh block for each current type.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageSign {
    /// Magnetic surface currents: images keep (J1, J2).
    Magnetic,
    /// Electric surface currents: images carry (-J1, -J2).
    Electric,
    /// Scalar densities transforming like magnetic-current divergences.
    ScalarPlus,
    /// Scalar densities transforming like electric-current divergences.
    ScalarMinus,
}

impl ImageSign {
    pub fn factor(self) -> f64 {
        match self {
            ImageSign::Magnetic | ImageSign::ScalarPlus => 1.0,
            ImageSign::Electric | ImageSign::ScalarMinus => -1.0,
        }
    }
}

/// Targets of an assembly pass: mesh nodes carry frames; free points are for
/// field evaluation and only support untraced kinds.
pub struct TargetSet {
    pub geoms: Vec<TargetGeom>,
    /// Panel id per target when the targets are the source mesh's own nodes.
    pub self_panel: Option<Vec<usize>>,
    pub has_frames: bool,
}

impl TargetSet {
    pub fn from_mesh(mesh: &PanelMesh) -> Self {
        TargetSet {
            geoms: mesh
                .nodes
                .iter()
                .map(|n| TargetGeom {
                    r: n.r,
                    z: n.z,
                    tr: n.frame.t[0],
                    tz: n.frame.t[1],
                    nr: n.frame.n[0],
                    nz: n.frame.n[1],
                })
                .collect(),
            self_panel: None,
            has_frames: true,
        }
    }

    /// Targets identical to the source mesh nodes; self panels use the
    /// singular rule.
    pub fn self_of(mesh: &PanelMesh) -> Self {
        let mut t = TargetSet::from_mesh(mesh);
        t.self_panel = Some(mesh.nodes.iter().map(|n| n.panel).collect());
        t
    }

    pub fn from_points(points: &[(f64, f64)]) -> Self {
        TargetSet {
            geoms: points.iter().map(|&(r, z)| TargetGeom::point(r, z)).collect(),
            self_panel: None,
            has_frames: false,
        }
    }

    pub fn len(&self) -> usize {
        self.geoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.geoms.is_empty()
    }
}

/// Assembly controls.
#[derive(Clone, Copy, Debug)]
pub struct AssemblyCtl {
    pub az: AzimuthalCtl,
    /// Pairs closer than this many source-panel lengths take the near path.
    pub near_factor: f64,
    /// Relative tolerance of the near-path parameter integration.
    pub s_tol: f64,
}

impl Default for AssemblyCtl {
    fn default() -> Self {
        AssemblyCtl { az: AzimuthalCtl::default(), near_factor: 2.0, s_tol: 1e-12 }
    }
}

fn requires_frames(kind: OpKind) -> bool {
    matches!(
        kind,
        OpKind::SingleLayerTan
            | OpKind::CurlTan
            | OpKind::CurlCurlTan
            | OpKind::GradScalarTan
            | OpKind::CurlNor
    )
}

fn self_capable(kind: OpKind) -> bool {
    // Weakly singular (log-class) trace kernels; hypersingular self blocks
    // are excluded by the formulation.
    matches!(kind, OpKind::SingleLayerTan | OpKind::CurlTan | OpKind::CurlNor | OpKind::Scalar)
}

/// Assembles all requested operator blocks from one source mesh to one
/// target set for azimuthal mode `m`. Returned matrices have block layout
/// rows = component * n_targets + target, cols = slot * n_sources + source.
pub fn assemble(
    kinds: &[OpKind],
    m: i32,
    k: C64,
    targets: &TargetSet,
    source: &PanelMesh,
    ctl: &AssemblyCtl,
) -> Result<Vec<CMat>> {
    for &kind in kinds {
        if requires_frames(kind) && !targets.has_frames {
            return Err(Error::Assembly(format!("{kind:?} requires framed targets")));
        }
    }
    let nt = targets.len();
    let ns = source.n_nodes();
    let mut mats: Vec<CMat> =
        kinds.iter().map(|kk| CMat::zeros(kk.rows() * nt, kk.cols() * ns)).collect();
    let stack = stack_len(kinds);
    let pb = panel_basis();
    let rule = SingularRule::log10();

    for (pi, panel) in source.panels.iter().enumerate() {
        let seg = &source.curve.segments[panel.segment];
        let base = pi * PANEL_NODES;
        let pnodes = &source.nodes[base..base + PANEL_NODES];
        let half = 0.5 * (panel.s1 - panel.s0);
        let mid = 0.5 * (panel.s0 + panel.s1);

        for (ti, tgt) in targets.geoms.iter().enumerate() {
            let is_self = targets.self_panel.as_ref().is_some_and(|sp| sp[ti] == pi);
            if is_self {
                for &kind in kinds {
                    if !self_capable(kind) {
                        return Err(Error::Assembly(format!(
                            "{kind:?} has no singular self-interaction pathway"
                        )));
                    }
                }
                // Target node index within the panel selects the rule.
                let tlocal = ti - base;
                let side_rule = &rule.rules[tlocal];
                for &(x_a, w_a) in side_rule {
                    let s = mid + half * x_a;
                    let p = seg.point(s);
                    let d = seg.deriv(s);
                    let dlen = (d[0] * d[0] + d[1] * d[1]).sqrt();
                    let src = SourceGeom { r: p[0], z: p[1], tr: d[0] / dlen, tz: d[1] / dlen };
                    let vals = integrate_ops(kinds, m, k, tgt, &src, &ctl.az)?;
                    // Lagrange basis at the auxiliary node.
                    let mut lj = [0.0f64; PANEL_NODES];
                    for (q, crow) in pb.coef_from_vals.iter().enumerate() {
                        let (pq, _) = legendre_p_and_dp(q, x_a);
                        for (j, lv) in lj.iter_mut().enumerate() {
                            *lv += pq * crow[j];
                        }
                    }
                    let wgeo = w_a * half * dlen * p[0];
                    scatter_basis(&mut mats, kinds, &vals, ti, nt, base, ns, &lj, wgeo, stack);
                }
                continue;
            }
            // Distance from the target to the panel in the meridian plane.
            let dist = pnodes
                .iter()
                .map(|n| ((n.r - tgt.r).powi(2) + (n.z - tgt.z).powi(2)).sqrt())
                .fold(f64::MAX, f64::min);
            if dist < ctl.near_factor * panel.length {
                // Near path: Legendre moments on a composite rule graded
                // geometrically toward the closest point of the panel. Each
                // graded piece keeps the kernel singularity at least one
                // piece-length away, so a fixed Gauss rule per piece reaches
                // full precision with a deterministic cost.
                let (snear, _) = pnodes.iter().enumerate().fold((0.0f64, f64::MAX), |acc, (j, n)| {
                    let d2 = (n.r - tgt.r).powi(2) + (n.z - tgt.z).powi(2);
                    if d2 < acc.1 {
                        (pb.nodes[j], d2)
                    } else {
                        acc
                    }
                });
                let delta = (dist / panel.length.max(1e-300)).clamp(1e-13, 2.0);
                let cuts = graded_cuts(snear, delta);
                let mut moments = vec![C64::new(0.0, 0.0); stack * PANEL_NODES];
                let glq = crate::quadrature::gauss_legendre(12);
                for w2 in cuts.windows(2) {
                    let (a, b) = (w2[0], w2[1]);
                    let h2 = 0.5 * (b - a);
                    let m2 = 0.5 * (a + b);
                    for (xq, wq) in glq.nodes.iter().zip(&glq.weights) {
                        let x = m2 + h2 * xq;
                        let s = mid + half * x;
                        let p = seg.point(s);
                        let d = seg.deriv(s);
                        let dlen = (d[0] * d[0] + d[1] * d[1]).sqrt();
                        let src =
                            SourceGeom { r: p[0], z: p[1], tr: d[0] / dlen, tz: d[1] / dlen };
                        let vals = integrate_ops(kinds, m, k, tgt, &src, &ctl.az)?;
                        let wgeo = wq * h2 * half * dlen * p[0];
                        for (q, crow) in (0..PANEL_NODES).map(|q| (q, legendre_p_and_dp(q, x).0)) {
                            for (c, &val) in vals.iter().enumerate() {
                                moments[c * PANEL_NODES + q] += val * wgeo * crow;
                            }
                        }
                    }
                }
                // entries_j = sum_q moments[c][q] coef[q][j]
                let mut lj_vals = vec![C64::new(0.0, 0.0); stack * PANEL_NODES];
                for c in 0..stack {
                    for j in 0..PANEL_NODES {
                        let mut acc = C64::new(0.0, 0.0);
                        for (q, crow) in pb.coef_from_vals.iter().enumerate() {
                            acc += moments[c * PANEL_NODES + q] * crow[j];
                        }
                        lj_vals[c * PANEL_NODES + j] = acc;
                    }
                }
                scatter_entries(&mut mats, kinds, &lj_vals, ti, nt, base, ns);
            } else {
                // Smooth path: plain Nyström weights.
                for (j, node) in pnodes.iter().enumerate() {
                    let src = SourceGeom {
                        r: node.r,
                        z: node.z,
                        tr: node.frame.t[0],
                        tz: node.frame.t[1],
                    };
                    let vals = integrate_ops(kinds, m, k, tgt, &src, &ctl.az)?;
                    let w = node.w * node.r;
                    let mut offset = 0;
                    for (ki, &kind) in kinds.iter().enumerate() {
                        let (rows, cols) = (kind.rows(), kind.cols());
                        for comp in 0..rows {
                            for slot in 0..cols {
                                let v = vals[offset + comp * cols + slot];
                                mats[ki][(comp * nt + ti, slot * ns + base + j)] += w * v;
                            }
                        }
                        offset += kind.ncomp();
                    }
                }
            }
        }
    }
    Ok(mats)
}

/// Reference-coordinate cuts of [-1, 1] graded geometrically toward s_star
/// with innermost spacing `delta`.
fn graded_cuts(s_star: f64, delta: f64) -> Vec<f64> {
    let mut cuts = vec![-1.0, 1.0];
    if s_star > -1.0 && s_star < 1.0 {
        cuts.push(s_star);
    }
    let mut d = delta;
    while d < 2.0 {
        for side in [-1.0, 1.0] {
            let x = s_star + side * d;
            if x > -1.0 + 1e-14 && x < 1.0 - 1e-14 {
                cuts.push(x);
            }
        }
        d *= 2.0;
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    cuts
}

/// Scatters stacked per-kind values against a Lagrange basis row.
#[allow(clippy::too_many_arguments)]
fn scatter_basis(
    mats: &mut [CMat],
    kinds: &[OpKind],
    vals: &[C64],
    ti: usize,
    nt: usize,
    base: usize,
    ns: usize,
    lj: &[f64; PANEL_NODES],
    wgeo: f64,
    _stack: usize,
) {
    let mut offset = 0;
    for (ki, &kind) in kinds.iter().enumerate() {
        let (rows, cols) = (kind.rows(), kind.cols());
        for comp in 0..rows {
            for slot in 0..cols {
                let v = vals[offset + comp * cols + slot] * wgeo;
                for (j, &l) in lj.iter().enumerate() {
                    mats[ki][(comp * nt + ti, slot * ns + base + j)] += v * l;
                }
            }
        }
        offset += kind.ncomp();
    }
}

/// Scatters precomputed per-node entries (near path).
fn scatter_entries(
    mats: &mut [CMat],
    kinds: &[OpKind],
    entries: &[C64],
    ti: usize,
    nt: usize,
    base: usize,
    ns: usize,
) {
    let mut offset = 0;
    for (ki, &kind) in kinds.iter().enumerate() {
        let (rows, cols) = (kind.rows(), kind.cols());
        for comp in 0..rows {
            for slot in 0..cols {
                let c = offset + comp * cols + slot;
                for j in 0..PANEL_NODES {
                    mats[ki][(comp * nt + ti, slot * ns + base + j)] +=
                        entries[c * PANEL_NODES + j];
                }
            }
        }
        offset += kind.ncomp();
    }
}

/// Assembles direct plus mirror-image blocks in one call:
/// A^H = A_source + sign * A_reflected.
pub fn assemble_with_image(
    kinds: &[OpKind],
    m: i32,
    k: C64,
    targets: &TargetSet,
    source: &PanelMesh,
    image: ImageSign,
    ctl: &AssemblyCtl,
) -> Result<Vec<CMat>> {
    let mut direct = assemble(kinds, m, k, targets, source, ctl)?;
    let refl = source.reflected(SurfaceLabel::C2);
    let mirrored = assemble(kinds, m, k, targets, &refl, ctl)?;
    let s = C64::new(image.factor(), 0.0);
    for (d, r) in direct.iter_mut().zip(mirrored) {
        d.add_scaled(s, &r);
    }
    Ok(direct)
}

/// A source ring (circle of revolution): line potentials for edge terms and
/// current loops. `tr`/`tz` only matter for vector kinds with a J1 slot.
#[derive(Clone, Copy, Debug)]
pub struct RingSource {
    pub r: f64,
    pub z: f64,
    pub tr: f64,
    pub tz: f64,
}

/// Assembles ring-source blocks: one source column per density component,
/// line measure r dtheta'.
pub fn assemble_ring(
    kinds: &[OpKind],
    m: i32,
    k: C64,
    targets: &TargetSet,
    ring: &RingSource,
    ctl: &AssemblyCtl,
) -> Result<Vec<CMat>> {
    for &kind in kinds {
        if requires_frames(kind) && !targets.has_frames {
            return Err(Error::Assembly(format!("{kind:?} requires framed targets")));
        }
    }
    let nt = targets.len();
    let mut mats: Vec<CMat> = kinds.iter().map(|kk| CMat::zeros(kk.rows() * nt, kk.cols())).collect();
    let src = SourceGeom { r: ring.r, z: ring.z, tr: ring.tr, tz: ring.tz };
    for (ti, tgt) in targets.geoms.iter().enumerate() {
        let vals = integrate_ops(kinds, m, k, tgt, &src, &ctl.az)?;
        let mut offset = 0;
        for (ki, &kind) in kinds.iter().enumerate() {
            let (rows, cols) = (kind.rows(), kind.cols());
            for comp in 0..rows {
                for slot in 0..cols {
                    mats[ki][(comp * nt + ti, slot)] +=
                        ring.r * vals[offset + comp * cols + slot];
                }
            }
            offset += kind.ncomp();
        }
    }
    Ok(mats)
}

/// Tangential-trace components of a field at a framed node:
/// n x E in the (t, e_theta) layout used by all trace operators,
/// i.e. [E_theta, -(E . t)].
pub fn tan_trace(e_cyl: [C64; 3], t: [f64; 2]) -> [C64; 2] {
    [e_cyl[1], -(e_cyl[0] * t[0] + e_cyl[2] * t[1])]
}

/// Normal component n . E at a framed node.
pub fn nor_trace(e_cyl: [C64; 3], n: [f64; 2]) -> C64 {
    e_cyl[0] * n[0] + e_cyl[2] * n[1]
}

// Spec-named convenience wrappers over the multi-kind assembler.

/// Single layer S (vector), optionally with image contributions.
pub fn assemble_single_layer(
    m: i32,
    k: C64,
    targets: &TargetSet,
    source: &PanelMesh,
    with_image: Option<ImageSign>,
    ctl: &AssemblyCtl,
) -> Result<CMat> {
    one_block(OpKind::SingleLayer, m, k, targets, source, with_image, ctl)
}

/// Curl of the single layer.
pub fn assemble_curl(
    m: i32,
    k: C64,
    targets: &TargetSet,
    source: &PanelMesh,
    with_image: Option<ImageSign>,
    ctl: &AssemblyCtl,
) -> Result<CMat> {
    one_block(OpKind::Curl, m, k, targets, source, with_image, ctl)
}

/// grad div of the single layer.
pub fn assemble_graddiv(
    m: i32,
    k: C64,
    targets: &TargetSet,
    source: &PanelMesh,
    with_image: Option<ImageSign>,
    ctl: &AssemblyCtl,
) -> Result<CMat> {
    one_block(OpKind::GradDiv, m, k, targets, source, with_image, ctl)
}

/// K = n x (1/ik) curl curl S, tangential-trace components. Rejects k = 0,
/// where the 1/ik scaling is undefined; use the stable decomposition path.
pub fn assemble_k_op(
    m: i32,
    k: C64,
    targets: &TargetSet,
    source: &PanelMesh,
    with_image: Option<ImageSign>,
    ctl: &AssemblyCtl,
) -> Result<CMat> {
    if k.norm() == 0.0 {
        return Err(Error::StaticKOperator);
    }
    let mut mat = one_block(OpKind::CurlCurlTan, m, k, targets, source, with_image, ctl)?;
    mat.scale(C64::new(1.0, 0.0) / (C64::new(0.0, 1.0) * k));
    Ok(mat)
}

/// N = n x curl S, tangential-trace components (principal value on the
/// diagonal block; the 1/2 jump constants live in the system assembly).
pub fn assemble_n_op(
    m: i32,
    k: C64,
    targets: &TargetSet,
    source: &PanelMesh,
    with_image: Option<ImageSign>,
    ctl: &AssemblyCtl,
) -> Result<CMat> {
    one_block(OpKind::CurlTan, m, k, targets, source, with_image, ctl)
}

/// Scalar single layer (2 pi int G_m u r' ds in modal form).
pub fn assemble_scalar_layer(
    m: i32,
    k: C64,
    targets: &TargetSet,
    source: &PanelMesh,
    with_image: Option<ImageSign>,
    ctl: &AssemblyCtl,
) -> Result<CMat> {
    one_block(OpKind::Scalar, m, k, targets, source, with_image, ctl)
}

/// Gradient of the scalar single layer (Cartesian components at theta = 0).
pub fn assemble_grad_scalar_layer(
    m: i32,
    k: C64,
    targets: &TargetSet,
    source: &PanelMesh,
    with_image: Option<ImageSign>,
    ctl: &AssemblyCtl,
) -> Result<CMat> {
    one_block(OpKind::GradScalar, m, k, targets, source, with_image, ctl)
}

/// Edge-circle potentials: scalar line potential and its gradient from the
/// circle (r_e, z_e); the modal integral is one kernel evaluation per target
/// with the ring weight.
pub fn assemble_edge_terms(
    m: i32,
    k: C64,
    targets: &TargetSet,
    edge_r: f64,
    edge_z: f64,
    ctl: &AssemblyCtl,
) -> Result<(CMat, CMat)> {
    let ring = RingSource { r: edge_r, z: edge_z, tr: 0.0, tz: 0.0 };
    let mats = assemble_ring(&[OpKind::Scalar, OpKind::GradScalar], m, k, targets, &ring, ctl)?;
    let mut it = mats.into_iter();
    Ok((it.next().unwrap(), it.next().unwrap()))
}

fn one_block(
    kind: OpKind,
    m: i32,
    k: C64,
    targets: &TargetSet,
    source: &PanelMesh,
    with_image: Option<ImageSign>,
    ctl: &AssemblyCtl,
) -> Result<CMat> {
    let mats = match with_image {
        Some(sign) => assemble_with_image(&[kind], m, k, targets, source, sign, ctl)?,
        None => assemble(&[kind], m, k, targets, source, ctl)?,
    };
    Ok(mats.into_iter().next().unwrap())
}

/// Writes an assembled matrix with a small versioned header for regression
/// comparisons.
pub fn dump_matrix(
    path: &std::path::Path,
    mat: &CMat,
    m: i32,
    k: C64,
    kind: &str,
    target: SurfaceLabel,
    source: SurfaceLabel,
) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(b"AXCV")?;
    f.write_all(&1u32.to_le_bytes())?;
    let header = format!("{kind};{target:?};{source:?};m={m};k={},{}", k.re, k.im);
    f.write_all(&(header.len() as u64).to_le_bytes())?;
    f.write_all(header.as_bytes())?;
    f.write_all(&(mat.nrows() as u64).to_le_bytes())?;
    f.write_all(&(mat.ncols() as u64).to_le_bytes())?;
    for v in mat.data() {
        f.write_all(&v.re.to_le_bytes())?;
        f.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{panelize, torus_curve, PanelizeOpts};
    use crate::kernels::{amp_f, amp_l, amp_m};
    use crate::quadrature::{adaptive_integrate_vec, AdaptiveCtl};

    fn torus_mesh(k: f64) -> PanelMesh {
        let curve = torus_curve([1.0, 0.1], 0.35).unwrap();
        let opts = PanelizeOpts { max_panel_len: 0.2, eps_geom: 1.0, nodes_per_wavelength: 24.0 };
        panelize(&curve, k, &opts, SurfaceLabel::Free)
    }

    /// Smooth test density in the (J1, J2) layout.
    fn torus_density(mesh: &PanelMesh) -> Vec<C64> {
        let ns = mesh.n_nodes();
        let mut d = vec![C64::new(0.0, 0.0); 2 * ns];
        for (i, n) in mesh.nodes.iter().enumerate() {
            let s = crate::TWO_PI * n.s;
            d[i] = C64::new(0.4 + s.cos(), 0.2 * s.sin());
            d[ns + i] = C64::new(s.sin(), 0.3 - 0.1 * s.cos());
        }
        d
    }

    /// Brute-force 3D surface quadrature of the single layer and its
    /// derivatives for a mode-m density on a closed surface of revolution.
    /// Returns (S, curl S, graddiv S) Cartesian components at the target
    /// meridian theta = 0.
    fn oracle_torus(
        mesh: &PanelMesh,
        dens: &[C64],
        m: i32,
        k: C64,
        target: (f64, f64),
        ntheta: usize,
    ) -> [[C64; 3]; 3] {
        let ns = mesh.n_nodes();
        let x = [target.0, 0.0, target.1];
        let mut s = [C64::new(0.0, 0.0); 3];
        let mut curl = [C64::new(0.0, 0.0); 3];
        let mut gd = [C64::new(0.0, 0.0); 3];
        let h = crate::TWO_PI / ntheta as f64;
        for (j, node) in mesh.nodes.iter().enumerate() {
            let j1 = dens[j];
            let j2 = dens[ns + j];
            for it in 0..ntheta {
                let th = h * it as f64;
                let (sn, cs) = th.sin_cos();
                let y = [node.r * cs, node.r * sn, node.z];
                let t3 = [node.frame.t[0] * cs, node.frame.t[0] * sn, node.frame.t[1]];
                let e3 = [-sn, cs, 0.0];
                let phase = C64::new(0.0, m as f64 * th).exp();
                let cur = [
                    (j1 * t3[0] + j2 * e3[0]) * phase,
                    (j1 * t3[1] + j2 * e3[1]) * phase,
                    (j1 * t3[2] + j2 * e3[2]) * phase,
                ];
                let u = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
                let rr = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
                let f = amp_f(k, rr);
                let mm = amp_m(k, rr);
                let ll = amp_l(k, rr);
                let w = node.w * node.r * h;
                for d in 0..3 {
                    s[d] += w * f * cur[d];
                }
                // curl: grad F x j = M u x j.
                curl[0] += w * mm * (u[1] * cur[2] - u[2] * cur[1]);
                curl[1] += w * mm * (u[2] * cur[0] - u[0] * cur[2]);
                curl[2] += w * mm * (u[0] * cur[1] - u[1] * cur[0]);
                let udotj = u[0] * cur[0] + u[1] * cur[1] + u[2] * cur[2];
                for d in 0..3 {
                    gd[d] += w * (ll * udotj * u[d] + mm * cur[d]);
                }
            }
        }
        [s, curl, gd]
    }

    #[test]
    fn torus_blocks_match_3d_oracle() {
        let k = C64::new(1.0, 0.0);
        let mesh = torus_mesh(1.0);
        let dens = torus_density(&mesh);
        let points = [(0.3, 0.9), (1.9, -0.7)];
        let targets = TargetSet::from_points(&points);
        let ctl = AssemblyCtl::default();
        for m in 0..3 {
            let mats = assemble(
                &[OpKind::SingleLayer, OpKind::Curl, OpKind::GradDiv],
                m,
                k,
                &targets,
                &mesh,
                &ctl,
            )
            .unwrap();
            for (ti, &pt) in points.iter().enumerate() {
                let oracle = oracle_torus(&mesh, &dens, m, k, pt, 600);
                for (which, mat) in mats.iter().enumerate() {
                    let got = mat.matvec(&dens);
                    for comp in 0..3 {
                        let g = got[comp * points.len() + ti];
                        let o = oracle[which][comp];
                        let scale = oracle[which].iter().map(|v| v.norm()).fold(0.0, f64::max);
                        assert!(
                            (g - o).norm() <= 1e-8 * scale.max(1e-10),
                            "m={m} block {which} comp {comp}: {g} vs {o}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn on_axis_target_high_modes_vanish() {
        let k = C64::new(1.0, 0.0);
        let mesh = torus_mesh(1.0);
        let dens = torus_density(&mesh);
        let targets = TargetSet::from_points(&[(0.0, 0.4)]);
        for m in 2..4 {
            let mats =
                assemble(&[OpKind::SingleLayer], m, k, &targets, &mesh, &AssemblyCtl::default())
                    .unwrap();
            let got = mats[0].matvec(&dens);
            let norm: f64 = got.iter().map(|v| v.norm()).sum();
            assert!(norm < 1e-12, "m={m}: |S| = {norm:.3e}");
        }
    }

    #[test]
    fn near_path_consistent_with_smooth() {
        let k = C64::new(1.3, 0.0);
        let mesh = torus_mesh(1.3);
        let dens = torus_density(&mesh);
        let targets = TargetSet::from_points(&[(1.0, 1.2)]);
        let smooth = assemble(
            &[OpKind::SingleLayer, OpKind::Curl],
            1,
            k,
            &targets,
            &mesh,
            &AssemblyCtl { near_factor: 0.0, ..Default::default() },
        )
        .unwrap();
        let near = assemble(
            &[OpKind::SingleLayer, OpKind::Curl],
            1,
            k,
            &targets,
            &mesh,
            &AssemblyCtl { near_factor: 1e6, ..Default::default() },
        )
        .unwrap();
        for (a, b) in smooth.iter().zip(&near) {
            let va = a.matvec(&dens);
            let vb = b.matvec(&dens);
            let scale: f64 = va.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for (x, y) in va.iter().zip(&vb) {
                assert!((x - y).norm() <= 1e-11 * scale, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn mode_sign_pattern() {
        // Under m -> -m the trace blocks transform with the diagonal sign
        // D = diag(+I, -I) on both the (t, theta) rows and (J1, J2) columns:
        // N_{-m} = D N_m D and S-like blocks flip overall sign as well.
        // (Separated target surface keeps this test on the smooth path.)
        let k = C64::new(0.9, 0.0);
        let mesh = torus_mesh(0.9);
        let dome = panelize(
            &crate::geometry::hemisphere_curve(),
            0.9,
            &PanelizeOpts { eps_geom: 0.05, ..Default::default() },
            SurfaceLabel::C1,
        );
        let targets = TargetSet::from_mesh(&dome);
        let ctl = AssemblyCtl::default();
        let kinds = [OpKind::CurlTan, OpKind::SingleLayerTan];
        let plus = assemble(&kinds, 2, k, &targets, &mesh, &ctl).unwrap();
        let minus = assemble(&kinds, -2, k, &targets, &mesh, &ctl).unwrap();
        let nt = dome.n_nodes();
        let n = mesh.n_nodes();
        let scale = plus[0].max_abs();
        for (which, flip) in [(0usize, 1.0), (1usize, -1.0)] {
            for row in (0..2 * nt).step_by(17) {
                for col in (0..2 * n).step_by(11) {
                    let rs = if row < nt { 1.0 } else { -1.0 };
                    let cs = if col < n { 1.0 } else { -1.0 };
                    let want = flip * rs * cs * plus[which][(row, col)];
                    let got = minus[which][(row, col)];
                    assert!(
                        (got - want).norm() <= 1e-12 * scale,
                        "block {which} ({row},{col}): {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn image_blocks_cancel_tangential_field_on_plane() {
        // Sources on the hemisphere with their images: tangential (x, y)
        // components of the relevant potentials vanish on the conductor
        // plane beyond the edge circle.
        let k = C64::new(1.1, 0.0);
        let dome = panelize(
            &crate::geometry::hemisphere_curve(),
            1.1,
            &PanelizeOpts { eps_geom: 1e-4, ..Default::default() },
            SurfaceLabel::C1,
        );
        let pts = [(2.4, 0.0), (3.1, 0.0), (4.5, 0.0)];
        let targets = TargetSet::from_points(&pts);
        let ctl = AssemblyCtl::default();
        let ns = dome.n_nodes();
        let dens: Vec<C64> = (0..2 * ns)
            .map(|i| C64::new(0.3 + (i as f64 * 0.11).sin(), (i as f64 * 0.07).cos()))
            .collect();
        let cases = [
            (OpKind::Curl, ImageSign::Magnetic),
            (OpKind::CurlCurl, ImageSign::Electric),
            (OpKind::SingleLayer, ImageSign::Electric),
        ];
        for (kind, sign) in cases {
            let mat = assemble_with_image(&[kind], 1, k, &targets, &dome, sign, &ctl).unwrap();
            let v = mat[0].matvec(&dens);
            let scale: f64 = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
            for (ti, _) in pts.iter().enumerate() {
                let ex = v[ti];
                let ey = v[pts.len() + ti];
                assert!(
                    ex.norm() <= 1e-10 * scale.max(1e-12) && ey.norm() <= 1e-10 * scale.max(1e-12),
                    "{kind:?}: tangential ({ex}, {ey}), scale {scale:.3e}"
                );
            }
        }
        // Scalar layer with the electric-divergence image sign vanishes on
        // the plane (so its tangential gradient does too).
        let sdens: Vec<C64> = (0..ns).map(|i| C64::new(1.0 + (i as f64 * 0.13).sin(), 0.2)).collect();
        let smat =
            assemble_with_image(&[OpKind::Scalar], 0, k, &targets, &dome, ImageSign::ScalarMinus, &ctl)
                .unwrap();
        let sv = smat[0].matvec(&sdens);
        let sscale = sv.iter().map(|x| x.norm()).fold(0.0, f64::max);
        // Compare against the one-sided magnitude to show real cancellation.
        let one = assemble(&[OpKind::Scalar], 0, k, &targets, &dome, &ctl).unwrap();
        let ov = one[0].matvec(&sdens);
        let oscale = ov.iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(sscale <= 1e-10 * oscale, "plane scalar {sscale:.3e} vs one-sided {oscale:.3e}");
    }

    #[test]
    fn self_block_matches_excision_oracle() {
        // Principal-value N on a closed generating circle at m = 0 applied
        // to a constant density, against a symmetric-excision oracle.
        let k = C64::new(0.8, 0.0);
        let curve = torus_curve([1.0, 0.1], 0.35).unwrap();
        let opts = PanelizeOpts { max_panel_len: 0.3, eps_geom: 1.0, nodes_per_wavelength: 24.0 };
        let mesh = panelize(&curve, 0.8, &opts, SurfaceLabel::Free);
        let ns = mesh.n_nodes();
        let targets = TargetSet::self_of(&mesh);
        let ctl = AssemblyCtl::default();
        let nmat = assemble(&[OpKind::CurlTan], 0, k, &targets, &mesh, &ctl).unwrap();
        let mut dens = vec![C64::new(0.0, 0.0); 2 * ns];
        for d in dens.iter_mut().take(ns) {
            *d = C64::new(1.0, 0.0);
        }
        for d in dens.iter_mut().skip(ns) {
            *d = C64::new(0.0, 0.5);
        }
        let got = nmat[0].matvec(&dens);

        // Oracle for a handful of target nodes: adaptive integration over
        // the whole circle with a small symmetric excision around the
        // target parameter (the kernel is integrable there).
        let seg = &mesh.curve.segments[0];
        for &ti in &[3usize, 41] {
            let tn = &mesh.nodes[ti];
            let tgt = TargetGeom {
                r: tn.r,
                z: tn.z,
                tr: tn.frame.t[0],
                tz: tn.frame.t[1],
                nr: tn.frame.n[0],
                nz: tn.frame.n[1],
            };
            let eps = 1e-9;
            let s_t = tn.s;
            let mut oracle = [C64::new(0.0, 0.0); 2];
            // Integrate (s_t + eps, s_t + 1 - eps) with periodic wrap and
            // breakpoints graded away from both sides of the excision.
            let mut seeds: Vec<f64> = Vec::new();
            let mut dlev = eps;
            while dlev < 0.5 {
                seeds.push(dlev);
                seeds.push(1.0 - dlev);
                dlev *= 4.0;
            }
            seeds.push(0.5);
            let actl = AdaptiveCtl { rel_tol: 1e-11, abs_floor: 1e-15, max_depth: 50 };
            let vals = adaptive_integrate_vec(
                |u, out| {
                    let s = (s_t + u).rem_euclid(1.0);
                    let p = seg.point(s);
                    let d = seg.deriv(s);
                    let dlen = (d[0] * d[0] + d[1] * d[1]).sqrt();
                    let src = SourceGeom { r: p[0], z: p[1], tr: d[0] / dlen, tz: d[1] / dlen };
                    let v = integrate_ops(&[OpKind::CurlTan], 0, k, &tgt, &src, &ctl.az).unwrap();
                    let w = dlen * p[0];
                    // Constant density (1, 0.5i): rows [t, theta] x slots.
                    out[0] = w * (v[0] * dens[0] + v[1] * dens[ns]);
                    out[1] = w * (v[2] * dens[0] + v[3] * dens[ns]);
                },
                eps,
                1.0 - eps,
                2,
                &seeds,
                &actl,
            )
            .unwrap();
            oracle[0] = vals[0];
            oracle[1] = vals[1];
            let scale = oracle[0].norm().max(oracle[1].norm()).max(1e-6);
            assert!(
                (got[ti] - oracle[0]).norm() <= 1e-8 * scale,
                "t-row at {ti}: {} vs {}",
                got[ti],
                oracle[0]
            );
            assert!(
                (got[ns + ti] - oracle[1]).norm() <= 1e-8 * scale,
                "theta-row at {ti}: {} vs {}",
                got[ns + ti],
                oracle[1]
            );
        }
    }

    #[test]
    fn scalar_layer_constant_density_matches_3d() {
        // Constant scalar density on the hemisphere arc at m = 0, k = 0:
        // the modal scalar layer equals the 3D single layer by brute force.
        let k = C64::new(0.0, 0.0);
        let dome = panelize(
            &crate::geometry::hemisphere_curve(),
            1.0,
            &PanelizeOpts { eps_geom: 1e-4, ..Default::default() },
            SurfaceLabel::C1,
        );
        let pts = [(0.2, 0.5)];
        let targets = TargetSet::from_points(&pts);
        let mat =
            assemble(&[OpKind::Scalar], 0, k, &targets, &dome, &AssemblyCtl::default()).unwrap();
        let ones = vec![C64::new(1.0, 0.0); dome.n_nodes()];
        let got = mat[0].matvec(&ones)[0];
        // 3D brute force over the hemisphere.
        let mut oracle = C64::new(0.0, 0.0);
        let ntheta = 800;
        let h = crate::TWO_PI / ntheta as f64;
        for node in &dome.nodes {
            for it in 0..ntheta {
                let th = h * it as f64;
                let y = [node.r * th.cos(), node.r * th.sin(), node.z];
                let rr = ((pts[0].0 - y[0]).powi(2) + y[1].powi(2) + (pts[0].1 - y[2]).powi(2))
                    .sqrt();
                oracle += node.w * node.r * h * amp_f(k, rr);
            }
        }
        assert!((got - oracle).norm() <= 1e-9 * oracle.norm(), "{got} vs {oracle}");
    }

    #[test]
    fn edge_potential_static_on_axis() {
        // Unit scalar density on the edge circle (radius 2), static kernel:
        // at an axis point (0, z) the line potential is
        // 2 pi r_e / (4 pi sqrt(r_e^2 + z^2)).
        let ctl = AssemblyCtl::default();
        let targets = TargetSet::from_points(&[(0.0, 1.3)]);
        let (s, grad) =
            assemble_edge_terms(0, C64::new(0.0, 0.0), &targets, 2.0, 0.0, &ctl).unwrap();
        let want = 2.0 * std::f64::consts::PI * 2.0
            / (4.0 * std::f64::consts::PI * (4.0f64 + 1.3 * 1.3).sqrt());
        let got = s[(0, 0)];
        assert!((got.re - want).abs() <= 1e-12 * want && got.im.abs() < 1e-14);
        // Oracle for the gradient z-component via dense trapezoid.
        let n = 200_000;
        let h = crate::TWO_PI / n as f64;
        let mut gz = 0.0;
        for i in 0..n {
            let th = h * i as f64;
            let y = [2.0 * th.cos(), 2.0 * th.sin(), 0.0];
            let rr = (y[0] * y[0] + y[1] * y[1] + (1.3 - y[2]) * (1.3 - y[2])).sqrt();
            gz += 2.0 * h * (1.3 - y[2]) * (-1.0) / (4.0 * std::f64::consts::PI * rr.powi(3));
        }
        let got_gz = grad[(2, 0)];
        assert!((got_gz.re + gz.abs()).abs() <= 1e-9, "gz {} vs {}", got_gz.re, -gz.abs());
        // Higher modes vanish on the axis.
        let (s1, _) = assemble_edge_terms(1, C64::new(0.0, 0.0), &targets, 2.0, 0.0, &ctl).unwrap();
        assert!(s1[(0, 0)].norm() < 1e-14);
    }
}
