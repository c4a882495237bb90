//! Quadrature engines: Gauss-Legendre panel rules, generalized Gaussian
//! rules for logarithmically singular self-interactions, and an adaptive
//! Gauss integrator for modal kernels and near-singular panel pairs.

use num_complex::Complex64 as C64;
use once_cell::sync::Lazy;

use crate::error::{Error, Result};
use crate::linalg::{lstsq, CMat};

/// Number of nodes on every panel.
pub const PANEL_NODES: usize = 10;

/// A Gauss-Legendre rule on [-1, 1].
#[derive(Clone, Debug)]
pub struct PanelRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Legendre polynomial value and derivative at x.
pub fn legendre_p_and_dp(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 1..n {
        let jf = j as f64;
        let p2 = ((2.0 * jf + 1.0) * x * p1 - jf * p0) / (jf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre rule with `n` nodes, exact through degree 2n-1.
pub fn gauss_legendre(n: usize) -> PanelRule {
    assert!(n >= 1);
    if n == 1 {
        return PanelRule { nodes: vec![0.0], weights: vec![2.0] };
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev-like initial guess, then Newton.
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_p_and_dp(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_p_and_dp(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        weights[i] = w;
        nodes[n - 1 - i] = -x;
        weights[n - 1 - i] = w;
    }
    // Enforce exact symmetry for odd n.
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    PanelRule { nodes, weights }
}

static GL10: Lazy<PanelRule> = Lazy::new(|| gauss_legendre(10));
static GL20: Lazy<PanelRule> = Lazy::new(|| gauss_legendre(20));

pub fn gl10() -> &'static PanelRule {
    &GL10
}

/// Reference calculus on the 10-node panel: Legendre coefficients from node
/// values (via discrete orthogonality, exact for degree <= 9) and the
/// spectral differentiation matrix.
pub struct PanelBasis {
    pub nodes: [f64; PANEL_NODES],
    pub weights: [f64; PANEL_NODES],
    /// coef[q][i]: c_q = sum_i coef[q][i] * v_i
    pub coef_from_vals: [[f64; PANEL_NODES]; PANEL_NODES],
    /// diff[i][j]: (df/dx)(x_i) = sum_j diff[i][j] * f(x_j), reference coords
    pub diff: [[f64; PANEL_NODES]; PANEL_NODES],
}

static PANEL_BASIS: Lazy<PanelBasis> = Lazy::new(|| {
    let gl = gauss_legendre(PANEL_NODES);
    let mut nodes = [0.0; PANEL_NODES];
    let mut weights = [0.0; PANEL_NODES];
    nodes.copy_from_slice(&gl.nodes);
    weights.copy_from_slice(&gl.weights);
    let mut coef = [[0.0; PANEL_NODES]; PANEL_NODES];
    for (q, row) in coef.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            let (p, _) = legendre_p_and_dp(q, nodes[j]);
            *entry = (2.0 * q as f64 + 1.0) / 2.0 * weights[j] * p;
        }
    }
    let mut diff = [[0.0; PANEL_NODES]; PANEL_NODES];
    for (i, drow) in diff.iter_mut().enumerate() {
        for (j, entry) in drow.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (q, crow) in coef.iter().enumerate() {
                let (_, dp) = legendre_p_and_dp(q, nodes[i]);
                acc += dp * crow[j];
            }
            *entry = acc;
        }
    }
    PanelBasis { nodes, weights, coef_from_vals: coef, diff }
});

pub fn panel_basis() -> &'static PanelBasis {
    &PANEL_BASIS
}

impl PanelBasis {
    /// Legendre coefficients of the interpolant through complex node values.
    pub fn coefficients(&self, vals: &[C64]) -> [C64; PANEL_NODES] {
        let mut c = [C64::new(0.0, 0.0); PANEL_NODES];
        for (q, row) in self.coef_from_vals.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (j, &w) in row.iter().enumerate() {
                acc += w * vals[j];
            }
            c[q] = acc;
        }
        c
    }

    /// Evaluates the interpolant at reference coordinate x in [-1, 1]
    /// (including the endpoints, used for edge extrapolation).
    pub fn interp(&self, vals: &[C64], x: f64) -> C64 {
        let c = self.coefficients(vals);
        let mut acc = C64::new(0.0, 0.0);
        for (q, cq) in c.iter().enumerate() {
            let (p, _) = legendre_p_and_dp(q, x);
            acc += cq * p;
        }
        acc
    }

    /// Spectral derivative of node values, reference coordinates.
    pub fn derivative(&self, vals: &[C64]) -> [C64; PANEL_NODES] {
        let mut out = [C64::new(0.0, 0.0); PANEL_NODES];
        for (i, drow) in self.diff.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (j, &d) in drow.iter().enumerate() {
                acc += d * vals[j];
            }
            out[i] = acc;
        }
        out
    }
}

/// Controls for the adaptive integrator.
#[derive(Clone, Copy, Debug)]
pub struct AdaptiveCtl {
    pub rel_tol: f64,
    pub abs_floor: f64,
    pub max_depth: u32,
}

impl Default for AdaptiveCtl {
    fn default() -> Self {
        AdaptiveCtl { rel_tol: 1e-12, abs_floor: 1e-15, max_depth: 52 }
    }
}

/// Adaptive Gauss integration of a vector-valued integrand over [a, b].
///
/// Error control compares 10- and 20-node Gauss values per subinterval;
/// intervals are bisected until the local discrepancy passes. `breakpoints`
/// seeds the initial partition (oscillation- or peak-aware splits).
pub fn adaptive_integrate_vec<F>(
    mut f: F,
    a: f64,
    b: f64,
    ncomp: usize,
    breakpoints: &[f64],
    ctl: &AdaptiveCtl,
) -> Result<Vec<C64>>
where
    F: FnMut(f64, &mut [C64]),
{
    assert!(b > a);
    let total_len = b - a;
    let gl_lo = &*GL10;
    let gl_hi = &*GL20;
    let mut buf = vec![C64::new(0.0, 0.0); ncomp];

    // Evaluate both rules on one subinterval.
    let eval_pair = |x0: f64, x1: f64, f: &mut F, buf: &mut [C64]| -> (Vec<C64>, Vec<C64>) {
        let half = 0.5 * (x1 - x0);
        let mid = 0.5 * (x0 + x1);
        let mut lo = vec![C64::new(0.0, 0.0); ncomp];
        let mut hi = vec![C64::new(0.0, 0.0); ncomp];
        for (x, w) in gl_lo.nodes.iter().zip(&gl_lo.weights) {
            f(mid + half * x, buf);
            for (acc, v) in lo.iter_mut().zip(buf.iter()) {
                *acc += *w * half * *v;
            }
        }
        for (x, w) in gl_hi.nodes.iter().zip(&gl_hi.weights) {
            f(mid + half * x, buf);
            for (acc, v) in hi.iter_mut().zip(buf.iter()) {
                *acc += *w * half * *v;
            }
        }
        (lo, hi)
    };

    // Initial partition and total-scale estimate.
    let mut cuts: Vec<f64> = std::iter::once(a)
        .chain(breakpoints.iter().copied().filter(|&x| x > a && x < b))
        .chain(std::iter::once(b))
        .collect();
    cuts.sort_by(|u, v| u.partial_cmp(v).unwrap());
    cuts.dedup();

    struct Seg {
        x0: f64,
        x1: f64,
        depth: u32,
        lo: Vec<C64>,
        hi: Vec<C64>,
    }

    let mut stack: Vec<Seg> = Vec::new();
    let mut scale = vec![0.0f64; ncomp];
    for w in cuts.windows(2) {
        let (lo, hi) = eval_pair(w[0], w[1], &mut f, &mut buf);
        for (s, v) in scale.iter_mut().zip(hi.iter()) {
            *s += v.norm();
        }
        stack.push(Seg { x0: w[0], x1: w[1], depth: 0, lo, hi });
    }
    let floor = ctl.abs_floor / ctl.rel_tol;
    for s in &mut scale {
        *s = s.max(floor);
    }

    let mut total = vec![C64::new(0.0, 0.0); ncomp];
    let mut worst_excess = 0.0f64;
    let mut budget: u64 = 200_000;
    while let Some(seg) = stack.pop() {
        let frac = (seg.x1 - seg.x0) / total_len;
        // The local-tolerance floor keeps the acceptance threshold well
        // above the rounding noise of the rule sums; without it, bisection
        // of already-converged intervals can cascade.
        let ok = seg
            .lo
            .iter()
            .zip(&seg.hi)
            .zip(&scale)
            .all(|((l, h), s)| (h - l).norm() <= ctl.rel_tol * s * frac.max(0.02));
        budget = budget.saturating_sub(1);
        if ok || seg.depth >= ctl.max_depth || budget == 0 {
            if !ok {
                let excess = seg
                    .lo
                    .iter()
                    .zip(&seg.hi)
                    .zip(&scale)
                    .map(|((l, h), s)| (h - l).norm() / s)
                    .fold(0.0, f64::max);
                worst_excess = worst_excess.max(excess);
            }
            for (t, v) in total.iter_mut().zip(seg.hi.iter()) {
                *t += *v;
            }
        } else {
            let mid = 0.5 * (seg.x0 + seg.x1);
            let (lo1, hi1) = eval_pair(seg.x0, mid, &mut f, &mut buf);
            let (lo2, hi2) = eval_pair(mid, seg.x1, &mut f, &mut buf);
            stack.push(Seg { x0: seg.x0, x1: mid, depth: seg.depth + 1, lo: lo1, hi: hi1 });
            stack.push(Seg { x0: mid, x1: seg.x1, depth: seg.depth + 1, lo: lo2, hi: hi2 });
        }
    }
    if worst_excess > 10.0 * ctl.rel_tol {
        return Err(Error::QuadratureNonConvergence {
            estimate: total.into_boxed_slice(),
            error: worst_excess,
            tol: ctl.rel_tol,
        });
    }
    Ok(total)
}

/// Scalar adaptive integration.
pub fn adaptive_integrate<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<C64>
where
    F: FnMut(f64) -> C64,
{
    let ctl = AdaptiveCtl { rel_tol: tol, ..AdaptiveCtl::default() };
    let out = adaptive_integrate_vec(|x, buf| buf[0] = f(x), a, b, 1, &[], &ctl)?;
    Ok(out[0])
}

/// Generalized Gaussian rules resolving integrands of the form
/// phi(s) + log|s - s_t| psi(s) on [-1, 1] with phi, psi polynomial.
///
/// One auxiliary node/weight set per target; targets are the 10 panel nodes.
/// Rules are exact (to the fitted residual) on the span of
/// {P_j(v), P_j(v) ln v} on each side of the target.
pub struct SingularRule {
    pub targets: Vec<f64>,
    pub rules: Vec<Vec<(f64, f64)>>,
    pub basis_deg: usize,
}

/// Degree of the smooth/log basis carried by the shipped rule.
pub const GGQ_BASIS_DEG: usize = 11;
const GGQ_SIDE_NODES: usize = 2 * (GGQ_BASIS_DEG + 1);
// Quadratic node grading resolves the log factor while keeping the
// innermost auxiliary node a workable distance from the target.
const GGQ_GRADING: f64 = 2.0;

/// Moments of shifted Legendre polynomials against ln v on [0, 1]:
/// -1 for j = 0, (-1)^{j+1} / (j (j+1)) otherwise.
fn legendre_log_moment(j: usize) -> f64 {
    if j == 0 {
        -1.0
    } else {
        let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
        sign / (j as f64 * (j + 1) as f64)
    }
}

fn shifted_legendre(j: usize, v: f64) -> f64 {
    legendre_p_and_dp(j, 2.0 * v - 1.0).0
}

/// One-sided rule on [0, L] exact on {P_j(v), P_j(v) ln v}, v = u/L.
/// Returned nodes are in u, weights include the length factor.
fn one_sided_log_rule(len: f64, basis_deg: usize, n_nodes: usize) -> Result<Vec<(f64, f64)>> {
    let gl = gauss_legendre(n_nodes);
    let vs: Vec<f64> = gl.nodes.iter().map(|&x| (0.5 * (x + 1.0)).powf(GGQ_GRADING)).collect();
    let nb = 2 * (basis_deg + 1);
    assert_eq!(nb, n_nodes);
    let mut a = CMat::zeros(nb, n_nodes);
    let mut rhs = vec![C64::new(0.0, 0.0); nb];
    for j in 0..=basis_deg {
        for (col, &v) in vs.iter().enumerate() {
            let p = shifted_legendre(j, v);
            a[(j, col)] = C64::new(p, 0.0);
            a[(basis_deg + 1 + j, col)] = C64::new(p * v.ln(), 0.0);
        }
        rhs[j] = C64::new(if j == 0 { 1.0 } else { 0.0 }, 0.0);
        rhs[basis_deg + 1 + j] = C64::new(legendre_log_moment(j), 0.0);
    }
    // Square moment system solved by Householder QR; graded nodes keep the
    // weights moderate so the fitted residual stays near machine precision.
    let w = lstsq(&a, &rhs)?;
    Ok(vs.iter().zip(w.iter()).map(|(&v, wi)| (len * v, len * wi.re)).collect())
}

impl SingularRule {
    /// Builds side rules for an arbitrary target position in (-1, 1).
    pub fn build_for_target(x_t: f64, basis_deg: usize) -> Result<Vec<(f64, f64)>> {
        let mut nodes = Vec::new();
        let l_left = x_t + 1.0;
        let l_right = 1.0 - x_t;
        if l_left > 1e-14 {
            for (u, w) in one_sided_log_rule(l_left, basis_deg, GGQ_SIDE_NODES)? {
                nodes.push((x_t - u, w));
            }
        }
        if l_right > 1e-14 {
            for (u, w) in one_sided_log_rule(l_right, basis_deg, GGQ_SIDE_NODES)? {
                nodes.push((x_t + u, w));
            }
        }
        Ok(nodes)
    }

    pub fn build(basis_deg: usize) -> Result<SingularRule> {
        let gl = gauss_legendre(PANEL_NODES);
        let mut rules = Vec::with_capacity(PANEL_NODES);
        for &x_t in &gl.nodes {
            rules.push(SingularRule::build_for_target(x_t, basis_deg)?);
        }
        Ok(SingularRule { targets: gl.nodes.clone(), rules, basis_deg })
    }

    /// The shipped 10-target rule.
    pub fn log10() -> &'static SingularRule {
        static RULE: Lazy<SingularRule> =
            Lazy::new(|| SingularRule::build(GGQ_BASIS_DEG).expect("singular rule construction"));
        &RULE
    }

    /// Integrates f over [-1, 1] with the log-aware rule for target index i.
    pub fn integrate<F>(&self, target_idx: usize, mut f: F) -> C64
    where
        F: FnMut(f64) -> C64,
    {
        let mut acc = C64::new(0.0, 0.0);
        for &(x, w) in &self.rules[target_idx] {
            acc += w * f(x);
        }
        acc
    }
}

/// Integrates phi(s) + log|s - s_t| psi(s) over [a, b] where s_t lies inside.
pub fn integrate_log_singular<F, G>(
    mut phi: F,
    mut psi: G,
    s_target: f64,
    (a, b): (f64, f64),
) -> Result<C64>
where
    F: FnMut(f64) -> C64,
    G: FnMut(f64) -> C64,
{
    if !(a < s_target && s_target < b) {
        return Err(Error::TargetOutsideInterval { target: s_target, a, b });
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let x_t = (s_target - mid) / half;
    let rule = SingularRule::build_for_target(x_t, GGQ_BASIS_DEG)?;
    let mut acc = C64::new(0.0, 0.0);
    for &(x, w) in &rule {
        let s = mid + half * x;
        // The reference-coordinate rule integrates g(x) with the log measured
        // in x; rescaling log|s-s_t| = log|x-x_t| + log(half) keeps the
        // integrand in the resolved class.
        acc += w * half * (phi(s) + (s - s_target).abs().ln() * psi(s));
    }
    Ok(acc)
}
