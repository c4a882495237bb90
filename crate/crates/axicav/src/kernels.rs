//! Modal kernels of the axisymmetric Helmholtz single layer and the
//! azimuthal integration engine behind every operator entry.
//!
//! For a source ring at (r', z') carrying a surface-frame density and a
//! target at (r, 0, z), each operator entry is a single azimuthal integral
//!
//! ```text
//!   int_0^{2pi} A(R(t')) * geom(t') * e^{i m t'} dt',
//! ```
//!
//! where `A` is a radial amplitude of the free-space kernel
//! F(R) = e^{ikR} / (4 pi R) and `geom` collects the Cartesian components
//! of the source basis vectors and of x - y. Derivatives with respect to
//! the target are taken analytically on F (gradient amplitude M, Hessian
//! amplitude L) before integration, so no 1/r factors ever appear and the
//! integrands stay bounded near the symmetry axis.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_integrate_vec, AdaptiveCtl};

/// F(R) = e^{ikR} / (4 pi R).
#[inline]
pub fn amp_f(k: C64, rr: f64) -> C64 {
    let ikr = C64::new(0.0, 1.0) * k * rr;
    ikr.exp() / (4.0 * std::f64::consts::PI * rr)
}

/// Gradient amplitude: grad_x F = M(R) (x - y), M = (ikR - 1) e^{ikR} / (4 pi R^3).
#[inline]
pub fn amp_m(k: C64, rr: f64) -> C64 {
    let ikr = C64::new(0.0, 1.0) * k * rr;
    (ikr - 1.0) * ikr.exp() / (4.0 * std::f64::consts::PI * rr * rr * rr)
}

/// Hessian amplitude: Hess_x F = L(R) (x-y)(x-y)^T + M(R) I,
/// L = (3 - 3ikR - (kR)^2) e^{ikR} / (4 pi R^5).
#[inline]
pub fn amp_l(k: C64, rr: f64) -> C64 {
    let ikr = C64::new(0.0, 1.0) * k * rr;
    (C64::new(3.0, 0.0) - 3.0 * ikr + ikr * ikr) * ikr.exp()
        / (4.0 * std::f64::consts::PI * rr.powi(5))
}

/// Source ring geometry: position and unit tangent of the generating curve.
#[derive(Clone, Copy, Debug)]
pub struct SourceGeom {
    pub r: f64,
    pub z: f64,
    pub tr: f64,
    pub tz: f64,
}

/// Target geometry; the frame is only consulted by trace-projected kinds.
#[derive(Clone, Copy, Debug)]
pub struct TargetGeom {
    pub r: f64,
    pub z: f64,
    pub tr: f64,
    pub tz: f64,
    pub nr: f64,
    pub nz: f64,
}

impl TargetGeom {
    pub fn point(r: f64, z: f64) -> Self {
        TargetGeom { r, z, tr: 0.0, tz: 0.0, nr: 0.0, nz: 0.0 }
    }
}

/// Operator integrand families. Vector kinds map the two tangential density
/// components (J1 along t, J2 along e_theta); scalar kinds map one. Trace
/// variants apply n x (rows [X_theta, -X_t]) or n . at the target inside the
/// integrand, which keeps near-singular cancellations pointwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    SingleLayer,
    SingleLayerTan,
    Curl,
    CurlTan,
    CurlNor,
    GradDiv,
    CurlCurl,
    CurlCurlTan,
    Scalar,
    GradScalar,
    GradScalarTan,
}

impl OpKind {
    /// Output components per target node.
    pub fn rows(self) -> usize {
        match self {
            OpKind::SingleLayer | OpKind::Curl | OpKind::GradDiv | OpKind::CurlCurl | OpKind::GradScalar => 3,
            OpKind::SingleLayerTan | OpKind::CurlTan | OpKind::CurlCurlTan | OpKind::GradScalarTan => 2,
            OpKind::CurlNor | OpKind::Scalar => 1,
        }
    }

    /// Density components per source node.
    pub fn cols(self) -> usize {
        match self {
            OpKind::Scalar | OpKind::GradScalar | OpKind::GradScalarTan => 1,
            _ => 2,
        }
    }

    pub fn ncomp(self) -> usize {
        self.rows() * self.cols()
    }
}

pub fn stack_len(kinds: &[OpKind]) -> usize {
    kinds.iter().map(|k| k.ncomp()).sum()
}

/// Azimuthal integration controls.
#[derive(Clone, Copy, Debug)]
pub struct AzimuthalCtl {
    pub tol: f64,
    pub max_depth: u32,
}

impl Default for AzimuthalCtl {
    fn default() -> Self {
        AzimuthalCtl { tol: 1e-12, max_depth: 48 }
    }
}

#[inline]
fn cross(a: [C64; 3], b: [f64; 3]) -> [C64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Evaluates the stacked integrand for all requested kinds at azimuth t',
/// summed with the mirrored azimuth 2 pi - t'. The radial amplitudes are
/// shared between the two angles since R is even in t'.
#[inline]
fn eval_integrand(
    kinds: &[OpKind],
    m: i32,
    k: C64,
    tgt: &TargetGeom,
    src: &SourceGeom,
    theta: f64,
    out: &mut [C64],
) {
    let (s, c) = theta.sin_cos();
    let zeta = tgt.z - src.z;
    let rr = (tgt.r * tgt.r + src.r * src.r - 2.0 * tgt.r * src.r * c + zeta * zeta).sqrt();
    let f = amp_f(k, rr);
    let mm = amp_m(k, rr);
    let needs_l = kinds
        .iter()
        .any(|kk| matches!(kk, OpKind::GradDiv | OpKind::CurlCurl | OpKind::CurlCurlTan));
    let ll = if needs_l { amp_l(k, rr) } else { C64::new(0.0, 0.0) };
    let k2f = k * k * f;

    let (mphs, mphc) = (m as f64 * theta).sin_cos();

    // Two mirrored azimuths: (c, s) and (c, -s); the phase conjugates.
    for pass in 0..2 {
        let sgn = if pass == 0 { 1.0 } else { -1.0 };
        let sv = sgn * s;
        let phase = C64::new(mphc, sgn * mphs);
        let u = [tgt.r - src.r * c, -src.r * sv, zeta];
        let v1 = [src.tr * c, src.tr * sv, src.tz];
        let v2 = [-sv, c, 0.0];
        let mut offset = 0;
        for &kind in kinds {
            match kind {
                OpKind::Scalar => {
                    out[offset] += phase * f;
                    offset += 1;
                }
                OpKind::GradScalar | OpKind::GradScalarTan => {
                    let g = [mm * u[0], mm * u[1], mm * u[2]];
                    offset = push_traced(kind, tgt, &[g], phase, out, offset);
                }
                OpKind::SingleLayer | OpKind::SingleLayerTan => {
                    let x1 = [f * v1[0], f * v1[1], f * v1[2]];
                    let x2 = [f * v2[0], f * v2[1], f * v2[2]];
                    offset = push_traced(kind, tgt, &[x1, x2], phase, out, offset);
                }
                OpKind::Curl | OpKind::CurlTan | OpKind::CurlNor => {
                    let gu = [mm * u[0], mm * u[1], mm * u[2]];
                    let x1 = cross(gu, v1);
                    let x2 = cross(gu, v2);
                    offset = push_traced(kind, tgt, &[x1, x2], phase, out, offset);
                }
                OpKind::GradDiv | OpKind::CurlCurl | OpKind::CurlCurlTan => {
                    let extra = if kind == OpKind::GradDiv { C64::new(0.0, 0.0) } else { k2f };
                    let mut xs = [[C64::new(0.0, 0.0); 3]; 2];
                    for (slot, v) in [v1, v2].iter().enumerate() {
                        let udotv = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
                        let lu = ll * udotv;
                        for d in 0..3 {
                            xs[slot][d] = lu * u[d] + (mm + extra) * v[d];
                        }
                    }
                    offset = push_traced(kind, tgt, &xs, phase, out, offset);
                }
            }
        }
        debug_assert_eq!(offset, out.len());
    }
}

/// Applies the target trace (if any) and accumulates entries row-major.
#[inline]
fn push_traced(
    kind: OpKind,
    tgt: &TargetGeom,
    xs: &[[C64; 3]],
    phase: C64,
    out: &mut [C64],
    mut offset: usize,
) -> usize {
    match kind {
        OpKind::SingleLayer | OpKind::Curl | OpKind::GradDiv | OpKind::CurlCurl | OpKind::GradScalar => {
            // Raw Cartesian components at the theta = 0 meridian.
            for d in 0..3 {
                for x in xs {
                    out[offset] += phase * x[d];
                    offset += 1;
                }
            }
        }
        OpKind::SingleLayerTan | OpKind::CurlTan | OpKind::CurlCurlTan | OpKind::GradScalarTan => {
            // n x X in frame components: [(n x X) . t, (n x X) . e_theta]
            // = [X_theta, -X_t].
            for x in xs {
                out[offset] += phase * x[1];
                offset += 1;
            }
            for x in xs {
                let xt = tgt.tr * x[0] + tgt.tz * x[2];
                out[offset] -= phase * xt;
                offset += 1;
            }
        }
        OpKind::CurlNor => {
            for x in xs {
                let xn = tgt.nr * x[0] + tgt.nz * x[2];
                out[offset] += phase * xn;
                offset += 1;
            }
        }
        OpKind::Scalar => unreachable!(),
    }
    offset
}

/// Initial partition of [0, pi]: oscillation-limited spacing plus geometric
/// refinement toward the near peak at t' = 0 when source and target rings
/// nearly touch.
fn breakpoints(k: C64, tgt: &TargetGeom, src: &SourceGeom) -> Vec<f64> {
    let pi = std::f64::consts::PI;
    let rrp = (tgt.r * src.r).max(0.0);
    let sq = rrp.sqrt();
    let mut cuts: Vec<f64> = Vec::new();
    let n_osc = (1.0 + k.norm() * sq).ceil() as usize;
    for i in 1..n_osc.min(512) {
        cuts.push(pi * i as f64 / n_osc as f64);
    }
    let d2 = (tgt.r - src.r).powi(2) + (tgt.z - src.z).powi(2);
    if sq > 0.0 {
        let w = (d2.sqrt() / sq).max(1e-14);
        if w < 0.5 {
            let mut x = w;
            while x < pi {
                cuts.push(x);
                x *= 2.0;
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    cuts
}

/// Integrates all requested operator integrands between one target point and
/// one source ring; returns the stacked entries (kind-major, row-major).
pub fn integrate_ops(
    kinds: &[OpKind],
    m: i32,
    k: C64,
    tgt: &TargetGeom,
    src: &SourceGeom,
    ctl: &AzimuthalCtl,
) -> Result<Vec<C64>> {
    let sep2 = (tgt.r - src.r).powi(2) + (tgt.z - src.z).powi(2);
    if sep2 == 0.0 {
        return Err(Error::CoincidentPoints { sep: 0.0 });
    }
    let ncomp = stack_len(kinds);
    let cuts = breakpoints(k, tgt, src);
    let actl = AdaptiveCtl { rel_tol: ctl.tol, abs_floor: 1e-15, max_depth: ctl.max_depth };
    adaptive_integrate_vec(
        |theta, out| {
            out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            eval_integrand(kinds, m, k, tgt, src, theta, out);
        },
        0.0,
        std::f64::consts::PI,
        ncomp,
        &cuts,
        &actl,
    )
}

/// Arguments of the modal kernel triple.
#[derive(Clone, Copy, Debug)]
pub struct KernelArgs {
    pub r: f64,
    pub z: f64,
    pub rp: f64,
    pub zp: f64,
    pub k: C64,
    pub m: i32,
}

/// Multi-index (dr, dz, drp, dzp) with total order <= 2.
pub type DerivIndex = [u8; 4];

#[derive(Clone, Debug)]
pub struct ModalKernelValue {
    pub gm: C64,
    pub gm_cos: C64,
    pub gm_sin: C64,
    /// Parallel to the requested derivative indices: derivatives of
    /// (gm, gm_cos, gm_sin).
    pub derivs: Vec<[C64; 3]>,
}

fn chi(idx: usize, r: f64, rp: f64, zeta: f64, c: f64) -> f64 {
    // chi_a = d(R^2/2)/da for a in (r, z, r', z').
    match idx {
        0 => r - rp * c,
        1 => zeta,
        2 => rp - r * c,
        3 => -zeta,
        _ => unreachable!(),
    }
}

fn eta(a: usize, b: usize, c: f64) -> f64 {
    // eta_ab = d^2(R^2/2)/da db.
    match (a.min(b), a.max(b)) {
        (0, 0) | (1, 1) | (2, 2) | (3, 3) => 1.0,
        (0, 2) => -c,
        (1, 3) => -1.0,
        _ => 0.0,
    }
}

/// Evaluates the modal kernel triple (scalar, cos-weighted, sin-weighted)
/// and an optional table of analytic partial derivatives with respect to
/// (r, z, r', z'), all by adaptive azimuthal integration. Coincident points
/// are rejected; self-interactions go through the singular-rule pathway.
pub fn eval_modal_kernel(args: &KernelArgs, derivs: &[DerivIndex]) -> Result<ModalKernelValue> {
    let sep2 = (args.r - args.rp).powi(2) + (args.z - args.zp).powi(2);
    if sep2 == 0.0 {
        return Err(Error::CoincidentPoints { sep: 0.0 });
    }
    let m = args.m;
    let k = args.k;
    let (r, z, rp, zp) = (args.r, args.z, args.rp, args.zp);
    let zeta = z - zp;
    let nval = 3 * (1 + derivs.len());
    let tgt = TargetGeom::point(r, z);
    let src = SourceGeom { r: rp, z: zp, tr: 0.0, tz: 0.0 };
    let cuts = breakpoints(k, &tgt, &src);
    let ctl = AdaptiveCtl { rel_tol: 1e-12, abs_floor: 1e-16, max_depth: 48 };
    let vals = adaptive_integrate_vec(
        |phi, out| {
            let (s, c) = phi.sin_cos();
            let rr = (r * r + rp * rp - 2.0 * r * rp * c + zeta * zeta).sqrt();
            let f = amp_f(k, rr);
            let mm = amp_m(k, rr);
            let ll = amp_l(k, rr);
            // Even integrands over [0, pi]: the mirrored angle doubles the
            // cosine moments, and 1/(2 pi) normalizes the mode projection.
            let (ms, mc) = (m as f64 * phi).sin_cos();
            let wgt = [mc, mc * c, ms * s];
            let norm = 1.0 / std::f64::consts::PI;
            for (kk, &w) in wgt.iter().enumerate() {
                out[kk] = f * w * norm;
            }
            for (di, idx) in derivs.iter().enumerate() {
                let mut active = [0usize; 2];
                let mut nact = 0;
                for (axis, &count) in idx.iter().enumerate() {
                    for _ in 0..count {
                        active[nact] = axis;
                        nact += 1;
                    }
                }
                let d = match nact {
                    1 => mm * chi(active[0], r, rp, zeta, c),
                    2 => {
                        let (a, b) = (active[0], active[1]);
                        ll * chi(a, r, rp, zeta, c) * chi(b, r, rp, zeta, c) + mm * eta(a, b, c)
                    }
                    n => panic!("derivative order {n} unsupported"),
                };
                for (kk, &w) in wgt.iter().enumerate() {
                    out[3 + 3 * di + kk] = d * w * norm;
                }
            }
        },
        0.0,
        std::f64::consts::PI,
        nval,
        &cuts,
        &ctl,
    )?;
    let derivs_out = (0..derivs.len())
        .map(|i| [vals[3 + 3 * i], vals[3 + 3 * i + 1], vals[3 + 3 * i + 2]])
        .collect();
    Ok(ModalKernelValue { gm: vals[0], gm_cos: vals[1], gm_sin: vals[2], derivs: derivs_out })
}
