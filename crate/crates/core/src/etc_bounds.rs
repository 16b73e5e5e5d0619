//! Constants and certified error bounds for the aperiodic event-triggered
//! implementation of a certified controller.

use nalgebra::DMatrix;
use rayon::prelude::*;
use robreg_conic::linalg::{sym_eigenvalues, symmetrize};
use robreg_conic::{psd_check, spectral_norm, ConicError};

use crate::model::{embed_da, embed_db, AugmentedSystem, ControllerGains, PlantModel};

/// Removable-singularity threshold for `ϑ_AB`.
pub const LIMIT_TOL: f64 = 1e-10;
/// Largest number of uncertain entries handled by vertex enumeration.
pub const MAX_VERTEX_ENTRIES: usize = 20;

/// A scalar that may be undefined because a hypothesis fails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Defined(f64),
    Undefined,
}

impl Bound {
    pub fn value(self) -> Option<f64> {
        match self {
            Bound::Defined(v) => Some(v),
            Bound::Undefined => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, Bound::Defined(_))
    }
}

/// How a box maximum was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxMethod {
    /// Exact maximum over all sign vertices.
    Vertex,
    /// Triangle-inequality upper bound.
    Triangle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtcConstants {
    pub beta: f64,
    pub rho_b: f64,
    pub rho_ab: f64,
    pub theta_b: f64,
    pub theta_ab: f64,
    pub lambda_min_p: f64,
    pub lambda_max_p: f64,
    pub norm_cbar: f64,
    pub theta_b_method: MaxMethod,
    pub theta_ab_method: MaxMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtcCertificate {
    pub constants: EtcConstants,
    pub q0: f64,
    pub q1: f64,
    pub h_bar: f64,
    pub h_max: Bound,
    pub f1: Bound,
    pub f2: Bound,
    pub eps_d: Bound,
}

/// Box entries with a positive bound, as `(row, col, bound)`.
fn box_entries(bound: &DMatrix<f64>) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for i in 0..bound.nrows() {
        for j in 0..bound.ncols() {
            if bound[(i, j)] > 0.0 {
                out.push((i, j, bound[(i, j)]));
            }
        }
    }
    out
}

/// Maximum of `‖base + Σ δ_e·coef_e‖` over `|δ_e| ≤ 1`, attained at a vertex.
fn vertex_max(base: &DMatrix<f64>, coefs: &[DMatrix<f64>]) -> f64 {
    let n = coefs.len();
    (0..1u64 << n)
        .into_par_iter()
        .map(|mask| {
            let mut m = base.clone();
            for (bit, c) in coefs.iter().enumerate() {
                let s = if mask >> bit & 1 == 1 { 1.0 } else { -1.0 };
                m += c * s;
            }
            spectral_norm(&m)
        })
        .reduce(|| 0.0, f64::max)
}

/// The `(n_x+n_u)×(2n_u)` matrix routing the second input channel into `ẇ`.
fn w_channel(n_x: usize, n_u: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n_x + n_u, 2 * n_u);
    m.view_mut((n_x, n_u), (n_u, n_u)).fill_with_identity();
    m
}

pub fn etc_constants(
    aug: &AugmentedSystem,
    model: &PlantModel,
    p: &DMatrix<f64>,
    gains: &ControllerGains,
) -> EtcConstants {
    let (nx, nu) = (model.n_x(), model.n_u());
    let eig = sym_eigenvalues(&symmetrize(p)).unwrap_or_default();
    let lambda_min_p = eig.first().copied().unwrap_or(0.0);
    let lambda_max_p = eig.last().copied().unwrap_or(0.0);
    let norm_p = spectral_norm(p);
    let norm_cbar = spectral_norm(&aug.cbar);
    let norm_fhat = spectral_norm(&aug.fhat);
    let norm_ab = spectral_norm(&model.a_bound);
    let norm_bb = spectral_norm(&model.b_bound);

    let beta = norm_p * spectral_norm(&(&gains.b_c * &model.c));
    let rho_b = (spectral_norm(&aug.bbar) + norm_bb).powi(2) * norm_fhat.powi(2);
    let rho_ab = rho_b * norm_cbar.powi(2) + (spectral_norm(&aug.abar) + norm_ab).powi(2);

    let b_entries = box_entries(&model.b_bound);
    let unit_db = |i: usize, j: usize, b: f64| {
        let mut d = DMatrix::zeros(nx, nu);
        d[(i, j)] = b;
        embed_db(&d)
    };

    let pbf = p * &aug.bbar * &aug.fhat;
    let (theta_b, theta_b_method) = if b_entries.len() <= MAX_VERTEX_ENTRIES {
        let coefs: Vec<_> = b_entries.iter().map(|&(i, j, b)| p * unit_db(i, j, b) * &aug.fhat).collect();
        (vertex_max(&pbf, &coefs), MaxMethod::Vertex)
    } else {
        (spectral_norm(&pbf) + norm_p * norm_bb * norm_fhat, MaxMethod::Triangle)
    };

    let tail = (&aug.f - &aug.fhat) * &aug.cbar;
    let base_ab = &aug.abar + (&aug.bbar - w_channel(nx, nu)) * &tail;
    let a_entries = box_entries(&model.a_bound);
    let mut coefs: Vec<DMatrix<f64>> = a_entries
        .iter()
        .map(|&(i, j, b)| {
            let mut d = DMatrix::zeros(nx, nx);
            d[(i, j)] = b;
            embed_da(&d, nu).expect("square")
        })
        .collect();
    // ΔB enters through embed_dB(ΔB)·(F − F̂)·C̄; entries with a vanishing
    // contribution do not change the maximum.
    for &(i, j, b) in &b_entries {
        let c = unit_db(i, j, b) * &tail;
        if c.amax() > 0.0 {
            coefs.push(c);
        }
    }
    let (theta_ab, theta_ab_method) = if coefs.len() <= MAX_VERTEX_ENTRIES {
        (vertex_max(&base_ab, &coefs), MaxMethod::Vertex)
    } else {
        (
            spectral_norm(&base_ab) + norm_ab + norm_bb * spectral_norm(&tail),
            MaxMethod::Triangle,
        )
    };

    EtcConstants {
        beta,
        rho_b,
        rho_ab,
        theta_b,
        theta_ab,
        lambda_min_p,
        lambda_max_p,
        norm_cbar,
        theta_b_method,
        theta_ab_method,
    }
}

/// `𝔢(h) = (e^{ϑh} − 1)/ϑ`.
pub fn exp_growth(h: f64, theta_ab: f64) -> f64 {
    if theta_ab <= LIMIT_TOL {
        h * (1.0 + theta_ab * h / 2.0)
    } else {
        (theta_ab * h).exp_m1() / theta_ab
    }
}

fn sq1_term(c: &EtcConstants, alpha: f64, q1: f64) -> f64 {
    let s = q1.sqrt();
    alpha * alpha * s * c.lambda_min_p / ((1.0 + 2.0 * s).powi(2) * c.lambda_max_p)
}

/// Numerator of the `h_max` radicand.
pub fn h_max_numerator(c: &EtcConstants, alpha: f64, q1: f64) -> f64 {
    sq1_term(c, alpha, q1) - 2.0 * c.theta_b.powi(2) * q1 * c.norm_cbar.powi(2)
}

/// Maximal certified inter-sample time for relative threshold `q1`.
pub fn h_max(c: &EtcConstants, alpha: f64, q1: f64) -> Bound {
    if !(alpha > 0.0) || !(q1 > 0.0) {
        return Bound::Undefined;
    }
    let num = h_max_numerator(c, alpha, q1);
    if !(num > 0.0) {
        return Bound::Undefined;
    }
    let nc2 = c.norm_cbar.powi(2);
    let nc4 = nc2 * nc2;
    let den = 6.0 * c.theta_b.powi(2) * (q1 * c.rho_b * nc4 + 6.0 * c.rho_ab * nc2)
        + 3.0 * c.beta.powi(2) * (c.rho_b * q1 * nc2 + c.rho_ab).powi(2);
    if den <= 0.0 {
        return Bound::Defined(f64::INFINITY);
    }
    let r = (num / den).sqrt();
    let t = c.theta_ab;
    if t <= LIMIT_TOL {
        Bound::Defined(r * (1.0 - t * r / 2.0))
    } else {
        Bound::Defined((t * r).ln_1p() / t)
    }
}

/// Relative threshold maximising [`h_max`] and the corresponding value.
pub fn h_max_best(c: &EtcConstants, alpha: f64) -> Option<(f64, f64)> {
    let hi = q1_perfect_tracking_bound(c, alpha);
    if !(hi > 0.0) {
        return None;
    }
    let hi = hi.min(1e6);
    let f = |q: f64| h_max(c, alpha, q).value().unwrap_or(0.0);
    // Golden-section search on log q1.
    let (mut a, mut b) = ((hi * 1e-12).ln(), hi.ln());
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1.exp()), f(x2.exp()));
    for _ in 0..200 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2.exp());
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1.exp());
        }
        if (b - a).abs() < 1e-12 {
            break;
        }
    }
    let q = ((a + b) / 2.0).exp();
    let h = f(q);
    (h > 0.0).then_some((q, h))
}

/// Common denominator of `𝔣₁` and `𝔣₂`.
pub fn f_denominator(c: &EtcConstants, alpha: f64, h_bar: f64, q1: f64) -> f64 {
    let e2 = exp_growth(h_bar, c.theta_ab).powi(2);
    let nc2 = c.norm_cbar.powi(2);
    let nc4 = nc2 * nc2;
    -c.theta_b.powi(2) * (2.0 * q1 * nc2 + 6.0 * q1 * c.rho_b * nc4 * e2 + 6.0 * c.rho_ab * nc2 * e2)
        - 3.0 * c.beta.powi(2) * (c.rho_b * q1 * nc2 + c.rho_ab).powi(2) * e2
        + sq1_term(c, alpha, q1)
}

pub fn f1(c: &EtcConstants, alpha: f64, h_bar: f64, q1: f64) -> Bound {
    let den = f_denominator(c, alpha, h_bar, q1);
    if !(den > 0.0) {
        return Bound::Undefined;
    }
    let e2 = exp_growth(h_bar, c.theta_ab).powi(2);
    let nc2 = c.norm_cbar.powi(2);
    let nc4 = nc2 * nc2;
    let num = c.theta_b.powi(2) * (2.0 + 6.0 * c.rho_b * nc2 * e2) * nc4 + 3.0 * c.beta.powi(2) * c.rho_b * nc4 * e2;
    Bound::Defined(num / den)
}

pub fn f2(c: &EtcConstants, alpha: f64, zeta: f64, h_bar: f64, q1: f64) -> Bound {
    let den = f_denominator(c, alpha, h_bar, q1);
    if !(den > 0.0) {
        return Bound::Undefined;
    }
    let e2 = exp_growth(h_bar, c.theta_ab).powi(2);
    let nc2 = c.norm_cbar.powi(2);
    let nc4 = nc2 * nc2;
    let s = q1.sqrt();
    let num = 6.0 * c.theta_b.powi(2) * nc4 * nc2 * e2
        + 3.0 * c.beta.powi(2) * nc4 * e2
        + alpha * zeta * nc2 * s / (1.0 + 2.0 * s);
    Bound::Defined(num / den)
}

/// `ε_d = sqrt(𝔣₁ q₀ + 𝔣₂ k_b²)`, defined when `h̄ ≤ h_max(q₁)` and the
/// shared denominator is positive.
pub fn eps_d(c: &EtcConstants, alpha: f64, zeta: f64, h_bar: f64, q0: f64, q1: f64, k_b: f64) -> Bound {
    match h_max(c, alpha, q1) {
        Bound::Defined(h) if h_bar <= h => {}
        _ => return Bound::Undefined,
    }
    match (f1(c, alpha, h_bar, q1), f2(c, alpha, zeta, h_bar, q1)) {
        (Bound::Defined(a), Bound::Defined(b)) => Bound::Defined((a * q0 + b * k_b * k_b).sqrt()),
        _ => Bound::Undefined,
    }
}

#[allow(clippy::too_many_arguments)]
pub fn etc_certificate(
    constants: EtcConstants,
    alpha: f64,
    zeta: f64,
    q0: f64,
    q1: f64,
    h_bar: f64,
    k_b: f64,
) -> EtcCertificate {
    let hm = h_max(&constants, alpha, q1);
    let ok = matches!(hm, Bound::Defined(h) if h_bar <= h);
    let (f1v, f2v) = if ok {
        (f1(&constants, alpha, h_bar, q1), f2(&constants, alpha, zeta, h_bar, q1))
    } else {
        (Bound::Undefined, Bound::Undefined)
    };
    let e = eps_d(&constants, alpha, zeta, h_bar, q0, q1, k_b);
    EtcCertificate {
        constants,
        q0,
        q1,
        h_bar,
        h_max: hm,
        f1: f1v,
        f2: f2v,
        eps_d: e,
    }
}

/// Quadratic trigger matrix over `[a_j; a_s; 1]` with `a = (w, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerMatrix {
    pub q: DMatrix<f64>,
}

impl TriggerMatrix {
    /// Size `n = n_u + n_y` of each information block.
    pub fn block(&self) -> usize {
        (self.q.nrows() - 1) / 2
    }

    /// `vᵀ Q v` for `v = [a_j; a_s; 1]`.
    pub fn form(&self, a_j: &[f64], a_s: &[f64]) -> f64 {
        let n = self.block();
        let mut v = nalgebra::DVector::zeros(2 * n + 1);
        v.rows_mut(0, n).copy_from_slice(a_j);
        v.rows_mut(n, n).copy_from_slice(a_s);
        v[2 * n] = 1.0;
        v.dot(&(&self.q * &v))
    }
}

pub fn qtilde(q0: f64, q1: f64, n: usize) -> TriggerMatrix {
    let mut q = DMatrix::zeros(2 * n + 1, 2 * n + 1);
    for i in 0..n {
        q[(i, i)] = 1.0;
        q[(n + i, n + i)] = 1.0 - q1;
        q[(n + i, i)] = -1.0;
        q[(i, n + i)] = -1.0;
    }
    q[(2 * n, 2 * n)] = -q0;
    TriggerMatrix { q }
}

/// `Q ⪯ Q̃(q0, q1)` by eigenvalues.
pub fn q_dominated(q: &TriggerMatrix, q0: f64, q1: f64, tol: f64) -> Result<bool, ConicError> {
    let n = q.block();
    if q.q.nrows() != 2 * n + 1 {
        return Err(ConicError::DimensionMismatch(format!("trigger matrix has even size {}", q.q.nrows())));
    }
    let qt = qtilde(q0, q1, n);
    psd_check(&(&qt.q - &q.q), tol)
}

/// Supremum of `q1` with `√q1 (2√q1 + 1)² < α² λ_min / (2 ‖C̄‖² ϑ_B² λ_max)`.
pub fn q1_perfect_tracking_bound(c: &EtcConstants, alpha: f64) -> f64 {
    let denom = 2.0 * c.norm_cbar.powi(2) * c.theta_b.powi(2) * c.lambda_max_p;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    let rhs = alpha * alpha * c.lambda_min_p / denom;
    q1_from_rhs(rhs)
}

/// Root of `√q (2√q + 1)² = rhs`.
pub fn q1_from_rhs(rhs: f64) -> f64 {
    if !(rhs > 0.0) {
        return 0.0;
    }
    let g = |s: f64| s * (2.0 * s + 1.0).powi(2);
    let (mut lo, mut hi) = (0.0_f64, rhs.min(rhs.cbrt()).max(1e-300));
    while g(hi) < rhs {
        hi *= 2.0;
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < rhs {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo * lo
}
