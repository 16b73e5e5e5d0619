//! Primal-dual interior-point method for small dense SDPs.
//!
//! The problem is brought to the conic form
//!
//! ```text
//! minimize cᵀx  subject to  G x + s = h,  s ∈ S₊^{n₁} × … × S₊^{n_m}
//! ```
//!
//! and solved through the homogeneous self-dual embedding with
//! Nesterov–Todd scaling and a Mehrotra predictor-corrector. Every `⪯ 0`
//! constraint `C + Σ x_k F_k` becomes the slack `s = −C − Σ x_k F_k`, every
//! `⪰ 0` constraint the slack `s = C + Σ x_k F_k`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{ConicError, Result};
use crate::linalg::{sorted_eigenvalues, symmetrize};
use crate::problem::{SdpProblem, Sense};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Feasibility and duality-gap tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_factor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            step_factor: 0.99,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64, max_iter: usize) -> Self {
        Self {
            tol,
            max_iter,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    /// The objective can be increased without bound.
    Unbounded,
    NumericalFailure,
}

impl SolveStatus {
    pub fn is_feasible(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Feasible)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationInfo {
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub x: Vec<f64>,
    pub status: SolveStatus,
    pub max_constraint_violation: f64,
    /// Value of the maximised objective at `x`.
    pub objective_value: f64,
    pub iterations: usize,
    pub trace: Vec<IterationInfo>,
}

/// Sparse symmetric coefficient of one variable in one block.
#[derive(Debug, Clone)]
struct Coeff {
    var: usize,
    support: Vec<usize>,
    sub: DMatrix<f64>,
    triplets: Vec<(usize, usize, f64)>,
}

impl Coeff {
    fn new(var: usize, m: &DMatrix<f64>) -> Option<Self> {
        let n = m.nrows();
        let support: Vec<usize> = (0..n)
            .filter(|&i| (0..n).any(|j| m[(i, j)] != 0.0))
            .collect();
        if support.is_empty() {
            return None;
        }
        let sub = DMatrix::from_fn(support.len(), support.len(), |a, b| m[(support[a], support[b])]);
        let mut triplets = Vec::new();
        for j in 0..n {
            for i in 0..n {
                if m[(i, j)] != 0.0 {
                    triplets.push((i, j, m[(i, j)]));
                }
            }
        }
        Some(Self {
            var,
            support,
            sub,
            triplets,
        })
    }

    fn dot(&self, z: &DMatrix<f64>) -> f64 {
        self.triplets.iter().map(|&(i, j, v)| v * z[(i, j)]).sum()
    }

    fn axpy(&self, a: f64, out: &mut DMatrix<f64>) {
        for &(i, j, v) in &self.triplets {
            out[(i, j)] += a * v;
        }
    }
}

#[derive(Debug, Clone)]
struct Block {
    n: usize,
    h: DMatrix<f64>,
    coeffs: Vec<Coeff>,
}

struct Cone {
    nvar: usize,
    blocks: Vec<Block>,
}

impl Cone {
    fn build(problem: &SdpProblem) -> Self {
        let mut blocks = Vec::new();
        for c in problem.all_constraints() {
            let sign = match c.sense {
                Sense::Nsd => -1.0,
                Sense::Psd => 1.0,
            };
            let n = c.expr.dim();
            if n == 0 {
                continue;
            }
            let h = c.expr.constant_part() * sign;
            let coeffs = c
                .expr
                .terms()
                .filter_map(|(k, m)| Coeff::new(k, &(m * -sign)))
                .collect();
            blocks.push(Block { n, h, coeffs });
        }
        Self {
            nvar: problem.n_scalars(),
            blocks,
        }
    }

    fn order(&self) -> usize {
        self.blocks.iter().map(|b| b.n).sum()
    }

    fn g_mul(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        self.blocks
            .iter()
            .map(|b| {
                let mut m = DMatrix::zeros(b.n, b.n);
                for c in &b.coeffs {
                    c.axpy(x[c.var], &mut m);
                }
                m
            })
            .collect()
    }

    fn gt_mul(&self, z: &[DMatrix<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.nvar];
        for (b, zb) in self.blocks.iter().zip(z) {
            for c in &b.coeffs {
                out[c.var] += c.dot(zb);
            }
        }
        out
    }

    fn h(&self) -> Vec<DMatrix<f64>> {
        self.blocks.iter().map(|b| b.h.clone()).collect()
    }
}

type Cmat = Vec<DMatrix<f64>>;

fn inner(a: &Cmat, b: &Cmat) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn cnorm(a: &Cmat) -> f64 {
    inner(a, a).sqrt()
}

fn vdot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn vnorm(a: &[f64]) -> f64 {
    vdot(a, a).sqrt()
}

fn caxpy(a: f64, x: &Cmat, y: &Cmat) -> Cmat {
    x.iter().zip(y).map(|(xi, yi)| xi * a + yi).collect()
}

fn vaxpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| a * xi + yi).collect()
}

/// Nesterov–Todd scaling of one block: `Rᵀ Z R = R⁻¹ S R⁻ᵀ = diag(λ)`.
struct Scaling {
    r: DMatrix<f64>,
    rit: DMatrix<f64>,
    lambda: DVector<f64>,
    winv: DMatrix<f64>,
    wnt: DMatrix<f64>,
}

impl Scaling {
    fn new(s: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Self> {
        let l = Cholesky::new(symmetrize(s))?.unpack();
        let l2 = Cholesky::new(symmetrize(z))?.unpack();
        let svd = (l2.transpose() * &l).svd(true, true);
        let u = svd.u?;
        let v = svd.v_t?.transpose();
        let lambda = svd.singular_values;
        if lambda.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return None;
        }
        let inv_sqrt = DMatrix::from_diagonal(&lambda.map(|v| 1.0 / v.sqrt()));
        let r = &l * &v * &inv_sqrt;
        let rit = &l2 * &u * &inv_sqrt;
        let winv = &rit * rit.transpose();
        let wnt = &r * r.transpose();
        Some(Self {
            r,
            rit,
            lambda,
            winv: symmetrize(&winv),
            wnt: symmetrize(&wnt),
        })
    }

    /// `W z = Rᵀ Z R`.
    fn w(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        self.r.transpose() * z * &self.r
    }

    /// `W⁻ᵀ s = R⁻¹ S R⁻ᵀ`.
    fn w_invt(&self, s: &DMatrix<f64>) -> DMatrix<f64> {
        self.rit.transpose() * s * &self.rit
    }

    /// `Wᵀ y = R Y Rᵀ`.
    fn w_t(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        &self.r * y * self.r.transpose()
    }

    /// Solve `λ ∘ X = D` for the Jordan product `(AB + BA)/2`.
    fn lambda_div(&self, d: &DMatrix<f64>) -> DMatrix<f64> {
        let l = &self.lambda;
        DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| 2.0 * d[(i, j)] / (l[i] + l[j]))
    }

    fn lambda_sq(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.lambda.map(|v| v * v))
    }
}

fn jordan(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    (a * b + b * a) * 0.5
}

/// Largest `t ≤ t_max` with `X + t·D ⪰ 0`, for `X ≻ 0`.
fn max_step(x: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let Some(chol) = Cholesky::new(symmetrize(x)) else {
        return 0.0;
    };
    let l = chol.l();
    let Some(li) = l.clone().try_inverse() else {
        return 0.0;
    };
    let m = &li * d * li.transpose();
    let lo = sorted_eigenvalues(&m).first().copied().unwrap_or(0.0);
    if lo >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lo
    }
}

/// Factored reduced KKT matrix `H_ik = Σ_b ⟨G_ib, W⁻¹ G_kb W⁻¹⟩`.
struct Kkt<'a> {
    cone: &'a Cone,
    scalings: &'a [Scaling],
    chol: Option<Cholesky<f64, Dyn>>,
    lu: Option<nalgebra::LU<f64, Dyn, Dyn>>,
    h_exact: DMatrix<f64>,
}

impl<'a> Kkt<'a> {
    fn new(cone: &'a Cone, scalings: &'a [Scaling]) -> Option<Self> {
        let nv = cone.nvar;
        let mut h = DMatrix::<f64>::zeros(nv, nv);
        for (b, sc) in cone.blocks.iter().zip(scalings) {
            for (ci, ck) in b.coeffs.iter().enumerate() {
                let wcols = sc.winv.select_columns(&ck.support);
                let t = &wcols * &ck.sub;
                let y = &t * wcols.transpose();
                for ci2 in &b.coeffs[ci..] {
                    let v = ci2.dot(&y);
                    h[(ci2.var, ck.var)] += v;
                    if ci2.var != ck.var {
                        h[(ck.var, ci2.var)] += v;
                    }
                }
            }
        }
        let h = symmetrize(&h);
        let scale = h.diagonal().iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
        let mut reg = h.clone();
        for i in 0..nv {
            reg[(i, i)] += 1e-13 * scale;
        }
        let chol = Cholesky::new(reg.clone());
        let lu = if chol.is_none() { Some(reg.lu()) } else { None };
        if chol.is_none() && !lu.as_ref().is_some_and(|l| l.is_invertible()) {
            return None;
        }
        Some(Self {
            cone,
            scalings,
            chol,
            lu,
            h_exact: h,
        })
    }

    fn factor_solve(&self, b: &DVector<f64>) -> DVector<f64> {
        match (&self.chol, &self.lu) {
            (Some(c), _) => c.solve(b),
            (None, Some(l)) => l.solve(b).unwrap_or_else(|| DVector::zeros(b.len())),
            _ => DVector::zeros(b.len()),
        }
    }

    /// Solve `Gᵀ z = u`, `G x − Wᵀ W z = v`.
    fn solve_once(&self, u: &[f64], v: &Cmat) -> (Vec<f64>, Cmat) {
        let wvw: Cmat = self
            .scalings
            .iter()
            .zip(v)
            .map(|(sc, vb)| &sc.winv * vb * &sc.winv)
            .collect();
        let rhs = DVector::from_vec(vaxpy(1.0, &self.cone.gt_mul(&wvw), u));
        let mut x = self.factor_solve(&rhs);
        let res = &rhs - &self.h_exact * &x;
        x += self.factor_solve(&res);
        let x: Vec<f64> = x.iter().copied().collect();
        let gx = self.cone.g_mul(&x);
        let z = self
            .scalings
            .iter()
            .zip(gx.iter().zip(v))
            .map(|(sc, (g, vb))| symmetrize(&(&sc.winv * (g - vb) * &sc.winv)))
            .collect();
        (x, z)
    }

    /// Solve `Gᵀ z = u`, `G x − Wᵀ W z = v` with iterative refinement on the
    /// unreduced system.
    fn solve(&self, u: &[f64], v: &Cmat) -> (Vec<f64>, Cmat) {
        let (mut x, mut z) = self.solve_once(u, v);
        for _ in 0..2 {
            let ru: Vec<f64> = vaxpy(-1.0, &self.cone.gt_mul(&z), u);
            let gx = self.cone.g_mul(&x);
            let rv: Cmat = self
                .scalings
                .iter()
                .zip(v.iter().zip(gx.iter().zip(&z)))
                .map(|(sc, (vb, (g, zb)))| vb - g + &sc.wnt * zb * &sc.wnt)
                .collect();
            let (dx, dz) = self.solve_once(&ru, &rv);
            x = vaxpy(1.0, &dx, &x);
            z = caxpy(1.0, &dz, &z);
        }
        (x, z)
    }
}

struct Direction {
    dx: Vec<f64>,
    dz: Cmat,
    ds: Cmat,
    dtau: f64,
    dkappa: f64,
}

#[allow(clippy::too_many_arguments)]
fn direction(
    kkt: &Kkt,
    sc: &[Scaling],
    c: &[f64],
    h: &Cmat,
    x1: &[f64],
    z1: &Cmat,
    tau: f64,
    kappa: f64,
    d_x: &[f64],
    d_z: &Cmat,
    d_tau: f64,
    d_s: &Cmat,
    d_kappa: f64,
) -> Direction {
    let ld: Cmat = sc.iter().zip(d_s).map(|(s, d)| s.lambda_div(d)).collect();
    let wt_ld: Cmat = sc.iter().zip(&ld).map(|(s, m)| s.w_t(m)).collect();
    let v: Cmat = d_z.iter().zip(&wt_ld).map(|(a, b)| -(a + b)).collect();
    let (x2, z2) = kkt.solve(d_x, &v);
    let num = d_tau + vdot(c, &x2) + inner(h, &z2) + d_kappa / tau;
    let den = kappa / tau - vdot(c, x1) - inner(h, z1);
    let dtau = num / den;
    let dx = vaxpy(dtau, x1, &x2);
    let dz = caxpy(dtau, z1, &z2);
    // ds from the linear residual equation, not the complementarity row.
    let gdx = kkt.cone.g_mul(&dx);
    let ds = h
        .iter()
        .zip(gdx.iter().zip(d_z))
        .map(|(hb, (g, d))| symmetrize(&(hb * dtau - g - d)))
        .collect();
    let dkappa = (d_kappa - kappa * dtau) / tau;
    Direction {
        dx,
        dz,
        ds,
        dtau,
        dkappa,
    }
}

fn step_length(s: &Cmat, z: &Cmat, tau: f64, kappa: f64, d: &Direction) -> f64 {
    let mut t = f64::INFINITY;
    for (sb, dsb) in s.iter().zip(&d.ds) {
        t = t.min(max_step(sb, dsb));
    }
    for (zb, dzb) in z.iter().zip(&d.dz) {
        t = t.min(max_step(zb, dzb));
    }
    if d.dtau < 0.0 {
        t = t.min(-tau / d.dtau);
    }
    if d.dkappa < 0.0 {
        t = t.min(-kappa / d.dkappa);
    }
    t
}

/// Shift a symmetric matrix into the interior of the PSD cone.
fn interior(m: &DMatrix<f64>) -> DMatrix<f64> {
    let lo = sorted_eigenvalues(m).first().copied().unwrap_or(0.0);
    let n = m.nrows();
    if lo > 1e-8 * m.norm().max(1.0) {
        symmetrize(m)
    } else {
        symmetrize(m) + DMatrix::identity(n, n) * (1.0 - lo)
    }
}

fn finish(problem: &SdpProblem, x: Vec<f64>, status: SolveStatus, iters: usize, trace: Vec<IterationInfo>) -> SdpSolution {
    let viol = problem.max_violation(&x);
    SdpSolution {
        objective_value: problem.objective_value(&x),
        x,
        status,
        max_constraint_violation: viol,
        iterations: iters,
        trace,
    }
}

/// Solve `problem` (a maximisation) to tolerance `opts.tol`.
pub fn solve(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    if !(opts.tol > 0.0) || !opts.tol.is_finite() {
        return Err(ConicError::InvalidOption(format!("tol must be positive, got {}", opts.tol)));
    }
    if !(opts.step_factor > 0.0 && opts.step_factor < 1.0) {
        return Err(ConicError::InvalidOption("step_factor must lie in (0, 1)".into()));
    }
    problem.validate()?;
    let cone = Cone::build(problem);
    let nv = cone.nvar;
    let mut c = vec![0.0; nv];
    for (&k, &v) in problem.objective() {
        c[k] = -v;
    }
    let zero_objective = c.iter().all(|v| *v == 0.0);
    let optimal_status = if zero_objective {
        SolveStatus::Feasible
    } else {
        SolveStatus::Optimal
    };

    if cone.blocks.is_empty() {
        let x = vec![0.0; nv];
        let status = if zero_objective {
            SolveStatus::Feasible
        } else {
            SolveStatus::Unbounded
        };
        return Ok(finish(problem, x, status, 0, Vec::new()));
    }

    let h = cone.h();
    let nu = cone.order() as f64;
    let resx0 = vnorm(&c).max(1.0);
    let resz0 = cnorm(&h).max(1.0);

    // Least-squares start with unit scaling.
    let unit: Vec<Scaling> = cone
        .blocks
        .iter()
        .map(|b| Scaling::new(&DMatrix::identity(b.n, b.n), &DMatrix::identity(b.n, b.n)).expect("identity scaling"))
        .collect();
    let Some(kkt0) = Kkt::new(&cone, &unit) else {
        return Ok(finish(problem, vec![0.0; nv], SolveStatus::NumericalFailure, 0, Vec::new()));
    };
    let zero_c: Cmat = cone.blocks.iter().map(|b| DMatrix::zeros(b.n, b.n)).collect();
    let (mut x, zls) = kkt0.solve(&vec![0.0; nv], &h);
    let mut s: Cmat = zls.iter().map(|m| interior(&(-m))).collect();
    let neg_c: Vec<f64> = c.iter().map(|v| -v).collect();
    let (_, z0) = kkt0.solve(&neg_c, &zero_c);
    let mut z: Cmat = z0.iter().map(interior).collect();
    let mut tau = 1.0;
    let mut kappa = 1.0;
    drop(kkt0);

    let mut trace = Vec::new();
    let mut last_step = 1.0;
    let mut best_feasible: Option<Vec<f64>> = None;
    let mut best_infeasible = f64::INFINITY;
    let mut best_unbounded = f64::INFINITY;
    let mut stalls = 0;

    for it in 0..=opts.max_iter {
        let gx = cone.g_mul(&x);
        let gtz = cone.gt_mul(&z);
        let rx = vaxpy(tau, &c, &gtz);
        let rz: Cmat = h
            .iter()
            .zip(gx.iter().zip(&s))
            .map(|(hb, (g, sb))| hb * tau - g - sb)
            .collect();
        let cx = vdot(&c, &x);
        let hz = inner(&h, &z);
        let rt = -cx - hz - kappa;
        let sz = inner(&s, &z);
        let mu = (sz + tau * kappa) / (nu + 1.0);

        let pres = cnorm(&rz) / tau / resz0;
        let dres = vnorm(&rx) / tau / resx0;
        let pcost = cx / tau;
        let dcost = -hz / tau;
        let gap = sz / (tau * tau);
        trace.push(IterationInfo {
            primal_objective: -pcost,
            dual_objective: -dcost,
            primal_residual: pres,
            dual_residual: dres,
            gap,
            step: last_step,
        });

        let xhat: Vec<f64> = x.iter().map(|v| v / tau).collect();
        let relgap = if pcost < 0.0 {
            gap / -pcost
        } else if dcost > 0.0 {
            gap / dcost
        } else {
            f64::INFINITY
        };
        if pres <= opts.tol && dres <= opts.tol && (gap <= opts.tol || relgap <= opts.tol) {
            if problem.max_violation(&xhat) <= opts.tol {
                return Ok(finish(problem, xhat, optimal_status, it, trace));
            }
        }
        if pres <= opts.tol && problem.max_violation(&xhat) <= opts.tol {
            best_feasible = Some(xhat.clone());
        }
        if hz < 0.0 {
            let ratio = vnorm(&gtz) / resx0 / -hz;
            if ratio <= opts.tol {
                return Ok(finish(problem, xhat, SolveStatus::Infeasible, it, trace));
            }
            best_infeasible = best_infeasible.min(ratio);
        }
        if cx < 0.0 {
            let gxs: Cmat = gx.iter().zip(&s).map(|(g, sb)| g + sb).collect();
            let ratio = cnorm(&gxs) / resz0 / -cx;
            if ratio <= opts.tol {
                return Ok(finish(problem, xhat, SolveStatus::Unbounded, it, trace));
            }
            best_unbounded = best_unbounded.min(ratio);
        }
        if it == opts.max_iter || !mu.is_finite() {
            break;
        }

        let Some(sc) = s
            .iter()
            .zip(&z)
            .map(|(sb, zb)| Scaling::new(sb, zb))
            .collect::<Option<Vec<_>>>()
        else {
            break;
        };
        let Some(kkt) = Kkt::new(&cone, &sc) else {
            break;
        };
        let (x1, z1) = kkt.solve(&neg_c, &h);

        let lam_sq: Cmat = sc.iter().map(|s| s.lambda_sq()).collect();
        let neg = |v: &[f64]| v.iter().map(|a| -a).collect::<Vec<_>>();
        let neg_rz: Cmat = rz.iter().map(|m| -m).collect();
        let neg_lsq: Cmat = lam_sq.iter().map(|m| -m).collect();
        let aff = direction(
            &kkt, &sc, &c, &h, &x1, &z1, tau, kappa,
            &neg(&rx), &neg_rz, -rt, &neg_lsq, -kappa * tau,
        );
        let a_aff = step_length(&s, &z, tau, kappa, &aff).min(1.0);
        let sigma = (1.0 - a_aff).powi(3);

        let one = 1.0 - sigma;
        let d_x: Vec<f64> = rx.iter().map(|v| -one * v).collect();
        let d_z: Cmat = rz.iter().map(|m| m * -one).collect();
        let d_s: Cmat = sc
            .iter()
            .zip(aff.ds.iter().zip(&aff.dz))
            .zip(&lam_sq)
            .map(|((scb, (dsb, dzb)), l2)| {
                let n = l2.nrows();
                -l2 - jordan(&scb.w_invt(dsb), &scb.w(dzb)) + DMatrix::identity(n, n) * (sigma * mu)
            })
            .collect();
        let d_kappa = -kappa * tau - aff.dkappa * aff.dtau + sigma * mu;
        let dir = direction(
            &kkt, &sc, &c, &h, &x1, &z1, tau, kappa,
            &d_x, &d_z, -one * rt, &d_s, d_kappa,
        );
        let a = (opts.step_factor * step_length(&s, &z, tau, kappa, &dir)).min(1.0);
        if !(a > 0.0) || !a.is_finite() {
            break;
        }
        x = vaxpy(a, &dir.dx, &x);
        s = caxpy(a, &dir.ds, &s).iter().map(symmetrize).collect();
        z = caxpy(a, &dir.dz, &z).iter().map(symmetrize).collect();
        tau += a * dir.dtau;
        kappa += a * dir.dkappa;
        last_step = a;
        stalls = if a < 1e-8 { stalls + 1 } else { 0 };
        if stalls >= 5 {
            break;
        }
        if !(tau > 0.0) || !(kappa > 0.0) {
            break;
        }
    }

    let iters = trace.len().saturating_sub(1);
    let xhat: Vec<f64> = x.iter().map(|v| v / tau).collect();
    if xhat.iter().all(|v| v.is_finite()) && problem.max_violation(&xhat) <= opts.tol {
        return Ok(finish(problem, xhat, SolveStatus::Feasible, iters, trace));
    }
    if let Some(xf) = best_feasible {
        return Ok(finish(problem, xf, SolveStatus::Feasible, iters, trace));
    }
    // Certificates lose accuracy once τ underflows; accept them at √tol.
    let loose = opts.tol.sqrt();
    if best_infeasible <= loose {
        return Ok(finish(problem, vec![0.0; nv], SolveStatus::Infeasible, iters, trace));
    }
    if best_unbounded <= loose {
        return Ok(finish(problem, vec![0.0; nv], SolveStatus::Unbounded, iters, trace));
    }
    let x = if xhat.iter().all(|v| v.is_finite()) {
        xhat
    } else {
        vec![0.0; nv]
    };
    Ok(finish(problem, x, SolveStatus::NumericalFailure, iters, trace))
}
