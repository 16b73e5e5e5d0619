//! Robust certification and synthesis programs for the augmented closed loop.

use nalgebra::DMatrix;
use rayon::prelude::*;
use robreg_conic::linalg::{sym_eigenvalues, symmetrize};
use robreg_conic::{
    solve, AffineMatrix, BlockSym, ConicError, MatrixVar, Restriction, ScalarVar, SdpProblem,
    SdpSolution, SolveStatus, SolverOptions, SymMatrixExpr, spectral_norm,
};
use thiserror::Error;

use crate::model::{augment, embed_da, embed_db, structure, ControllerGains, ModelError, PlantModel};

/// Lower bound on `P`, `ζ`, `κ`, `μ` and `U` in every program.
pub const STRICT_MARGIN: f64 = 1e-6;
/// Scales of `U_k = sI` tried at the incumbent `ζ` besides the current weight.
const U_SCALES: [f64; 3] = [0.1, 1.0, 10.0];
/// Factors of the extrapolated gain step.
const EXTRAPOLATION: [f64; 3] = [2.0, 4.0, 8.0];
/// Integral gains tried by [`integral_seed`], as fractions of the decay rate.
const SEED_FRACTIONS: [f64; 3] = [0.03, 0.1, 0.3];
/// Lower bound on `P` in the zero-gain initialization.
pub const INIT_P_MARGIN: f64 = 1.0;
/// Eigenvalue slack of [`vertex_verify`].
pub const ORACLE_TOL: f64 = 1e-7;
/// Default number of uncertain entries enumerated by [`vertex_verify`].
pub const MAX_VERTEX_ENTRIES: usize = 20;

pub fn default_zeta_grid() -> Vec<f64> {
    (-3..=3).map(|e| 10f64.powi(e)).collect()
}

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error("every certification solve failed ({attempts} attempts)")]
    AllSolvesFailed { attempts: usize },
    #[error("initialization failed: {0}")]
    InitializationInfeasible(String),
    #[error("synthesis converged with objective {objective:.6e} <= 0")]
    StalledBelowZero {
        objective: f64,
        certificate: Box<SynthesisCertificate>,
        trace: IterationTrace,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not positive definite (min eigenvalue {min_eig:.3e})")]
    NotPositiveDefinite { min_eig: f64 },
    #[error("invalid option: {0}")]
    InvalidOption(String),
}

pub type Result<T> = std::result::Result<T, SynthesisError>;

/// Outcome of one certification solve at a fixed `ζ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaDiagnostic {
    pub zeta: f64,
    pub status: SolveStatus,
    pub alpha: Option<f64>,
    pub iterations: usize,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisCertificate {
    pub p: DMatrix<f64>,
    pub alpha: f64,
    pub zeta: f64,
    /// `κ_ij`; zero where `a_{b,ij} = 0`.
    pub kappa: DMatrix<f64>,
    /// `μ_ik`; zero where `b_{b,ik} = 0`.
    pub mu: DMatrix<f64>,
    pub gains: ControllerGains,
    pub norm_cbar: f64,
    pub k_b: f64,
    pub eps_c: f64,
    pub objective: f64,
    pub diagnostics: Vec<ZetaDiagnostic>,
}

impl SynthesisCertificate {
    /// `α/ζ > 0`.
    pub fn certified(&self) -> bool {
        self.objective > 0.0
    }
}

/// `ε_c = k_b ‖C̄‖ sqrt(λ_max(P) / (max{0, α/ζ} λ_min(P)))`.
pub fn eps_c_value(k_b: f64, norm_cbar: f64, p: &DMatrix<f64>, ratio: f64) -> f64 {
    if k_b == 0.0 && ratio > 0.0 {
        return 0.0;
    }
    if ratio <= 0.0 {
        return if k_b > 0.0 { f64::INFINITY } else { f64::NAN };
    }
    let eig = sym_eigenvalues(&symmetrize(p)).unwrap_or_default();
    let (lmin, lmax) = match (eig.first(), eig.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return f64::INFINITY,
    };
    if lmin <= 0.0 {
        return f64::INFINITY;
    }
    k_b * norm_cbar * (lmax / (ratio * lmin)).sqrt()
}

pub fn eps_c(cert: &SynthesisCertificate, k_b: f64) -> f64 {
    eps_c_value(k_b, cert.norm_cbar, &cert.p, cert.objective)
}

/// Nonzero bound entries in row-major order.
#[derive(Debug, Clone)]
struct Slices {
    a: Vec<(usize, usize, f64)>,
    b: Vec<(usize, usize, f64)>,
}

fn nonzero(m: &DMatrix<f64>) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if m[(i, j)] != 0.0 {
                out.push((i, j, m[(i, j)]));
            }
        }
    }
    out
}

impl Slices {
    fn new(model: &PlantModel) -> Self {
        Self {
            a: nonzero(&model.a_bound),
            b: nonzero(&model.b_bound),
        }
    }
}

/// `n_x × len` matrix whose column `l` is `e_i` for slice `l = (i, ·)`.
fn row_selector(n_x: usize, entries: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(n_x, entries.len());
    for (l, &(i, _, _)) in entries.iter().enumerate() {
        s[(i, l)] = 1.0;
    }
    s
}

fn unit(n: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    m[(i, j)] = 1.0;
    m
}

fn scalar_diag(vars: &[ScalarVar], coeffs: &[f64]) -> AffineMatrix {
    let n = vars.len();
    let mut out = AffineMatrix::zeros(n, n);
    for (l, (v, c)) in vars.iter().zip(coeffs).enumerate() {
        out = out + v.times(&(unit(n, l, l) * *c));
    }
    out
}

/// Symmetric arrow matrix with `top` in the corner, `(row, diag)` pairs below
/// it and zeros elsewhere; empty rows are skipped.
fn arrow(top: AffineMatrix, rows: Vec<(AffineMatrix, AffineMatrix)>) -> SymMatrixExpr {
    let rows: Vec<_> = rows.into_iter().filter(|(r, _)| r.nrows() > 0).collect();
    let mut sizes = vec![top.nrows()];
    sizes.extend(rows.iter().map(|(r, _)| r.nrows()));
    let mut b = BlockSym::new(sizes);
    b.set(0, 0, top);
    for (l, (r, d)) in rows.into_iter().enumerate() {
        b.set(l + 1, 0, r);
        b.set(l + 1, l + 1, d);
    }
    b.build()
}

/// Multipliers and blocks shared by both programs.
struct Uncertainty {
    kappa: Vec<ScalarVar>,
    mu: Vec<ScalarVar>,
    penalty: AffineMatrix,
    h1t: AffineMatrix,
    g1: AffineMatrix,
    h1bt: AffineMatrix,
    g2: AffineMatrix,
}

fn uncertainty(problem: &mut SdpProblem, slices: &Slices, j: &DMatrix<f64>, p: &AffineMatrix) -> Uncertainty {
    let (nx, n) = j.shape();
    let kappa: Vec<ScalarVar> = slices
        .a
        .iter()
        .map(|&(i, jj, _)| problem.add_scalar(&format!("kappa_{i}_{jj}"), Restriction::AtLeast(STRICT_MARGIN)))
        .collect();
    let mu: Vec<ScalarVar> = slices
        .b
        .iter()
        .map(|&(i, k, _)| problem.add_scalar(&format!("mu_{i}_{k}"), Restriction::AtLeast(STRICT_MARGIN)))
        .collect();
    let mut penalty = AffineMatrix::zeros(n, n);
    for (v, &(_, jj, _)) in kappa.iter().zip(&slices.a) {
        penalty = penalty + v.times(&unit(n, jj, jj));
    }
    let ga: Vec<f64> = slices.a.iter().map(|e| -1.0 / (e.2 * e.2)).collect();
    let gb: Vec<f64> = slices.b.iter().map(|e| -1.0 / (e.2 * e.2)).collect();
    let sa = row_selector(nx, &slices.a);
    let sb = row_selector(nx, &slices.b);
    Uncertainty {
        penalty,
        h1t: p.mul_left(&(sa.transpose() * j)),
        g1: scalar_diag(&kappa, &ga),
        h1bt: p.mul_left(&(sb.transpose() * j)),
        g2: scalar_diag(&mu, &gb),
        kappa,
        mu,
    }
}

fn entries_matrix(
    shape: (usize, usize),
    entries: &[(usize, usize, f64)],
    vars: &[ScalarVar],
    x: &[f64],
) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(shape.0, shape.1);
    for (&(i, j, _), v) in entries.iter().zip(vars) {
        m[(i, j)] = v.value(x);
    }
    m
}

/// Certification program at fixed gains and `ζ`; maximises `α`.
#[derive(Debug, Clone)]
pub struct CertificationProgram {
    pub problem: SdpProblem,
    pub zeta: f64,
    pub p: MatrixVar,
    pub alpha: ScalarVar,
    pub kappa: Vec<ScalarVar>,
    pub mu: Vec<ScalarVar>,
    slices_a: Vec<(usize, usize, f64)>,
    slices_b: Vec<(usize, usize, f64)>,
    n_x: usize,
    n_u: usize,
}

impl CertificationProgram {
    pub fn kappa_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        entries_matrix((self.n_x, self.n_x), &self.slices_a, &self.kappa, x)
    }

    pub fn mu_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        entries_matrix((self.n_x, self.n_u), &self.slices_b, &self.mu, x)
    }

    /// The robust LMI, the first constraint of the problem.
    pub fn lmi(&self) -> &SymMatrixExpr {
        &self.problem.constraints()[0].expr
    }
}

/// `r_k = (row k of F C̄)ᵀ` for the physical inputs `k < n_u`.
fn input_rows(f: &DMatrix<f64>, cbar: &DMatrix<f64>, n_u: usize) -> Vec<DMatrix<f64>> {
    let fc = f * cbar;
    (0..n_u).map(|k| DMatrix::from_column_slice(fc.ncols(), 1, fc.row(k).transpose().as_slice())).collect()
}

pub fn assemble_certification(model: &PlantModel, gains: &ControllerGains, zeta: f64) -> Result<CertificationProgram> {
    assemble_certification_with_margin(model, gains, zeta, STRICT_MARGIN)
}

fn assemble_certification_with_margin(
    model: &PlantModel,
    gains: &ControllerGains,
    zeta: f64,
    p_margin: f64,
) -> Result<CertificationProgram> {
    if !(zeta > 0.0) || !zeta.is_finite() {
        return Err(SynthesisError::InvalidOption(format!("zeta must be positive, got {zeta}")));
    }
    let aug = augment(model, gains)?;
    let slices = Slices::new(model);
    let (nx, nu) = (model.n_x(), model.n_u());
    let n = nx + nu;
    let mut problem = SdpProblem::new();
    let pv = problem.add_symmetric("P", n, Restriction::PsdMargin(p_margin));
    let alpha = problem.add_scalar("alpha", Restriction::Free);
    let p = pv.expr();
    let unc = uncertainty(&mut problem, &slices, &aug.j, &p);

    let closed = &aug.abar + &aug.bbar * &aug.f * &aug.cbar;
    let r = input_rows(&aug.f, &aug.cbar, nu);
    let mut top = p.mul_right(&closed).sym() + alpha.times(&DMatrix::identity(n, n)) + unc.penalty.clone();
    for (v, &(_, k, _)) in unc.mu.iter().zip(&slices.b) {
        top = top + v.times(&(&r[k] * r[k].transpose()));
    }
    let jp = p.mul_left(&aug.j);
    let lmi = arrow(
        top,
        vec![
            (unc.h1t, unc.g1),
            (unc.h1bt, unc.g2),
            (jp, AffineMatrix::constant(DMatrix::identity(nx, nx) * -zeta)),
        ],
    );
    problem.add_nsd("robust_lmi", lmi);
    problem.maximize(alpha);
    Ok(CertificationProgram {
        problem,
        zeta,
        p: pv,
        alpha,
        kappa: unc.kappa,
        mu: unc.mu,
        slices_a: slices.a,
        slices_b: slices.b,
        n_x: nx,
        n_u: nu,
    })
}

/// Dense blocks of the robust LMI at given multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlocks {
    /// `Sym(P Ā + P B̄ F C̄) + α I`.
    pub m: DMatrix<f64>,
    pub penalty: DMatrix<f64>,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    pub g3: Vec<f64>,
    pub h1: DMatrix<f64>,
    pub h1b: DMatrix<f64>,
    pub h2: DMatrix<f64>,
    pub jp: DMatrix<f64>,
}

impl LmiBlocks {
    /// `M + penalty − H2 G3⁻¹ H2ᵀ`.
    pub fn m_prime(&self) -> DMatrix<f64> {
        let mut out = &self.m + &self.penalty;
        for (l, g) in self.g3.iter().enumerate() {
            let c = self.h2.column(l);
            out -= c * c.transpose() / *g;
        }
        out
    }

    /// The full four-block matrix.
    pub fn assemble(&self, zeta: f64) -> DMatrix<f64> {
        let n = self.m.nrows();
        let (na, nb, nx) = (self.g1.len(), self.g2.len(), self.jp.nrows());
        let dim = n + na + nb + nx;
        let mut out = DMatrix::zeros(dim, dim);
        out.view_mut((0, 0), (n, n)).copy_from(&self.m_prime());
        let mut place = |off: usize, row: &DMatrix<f64>, diag: &DMatrix<f64>| {
            let k = row.nrows();
            out.view_mut((off, 0), (k, n)).copy_from(row);
            out.view_mut((0, off), (n, k)).copy_from(&row.transpose());
            out.view_mut((off, off), (k, k)).copy_from(diag);
        };
        let diag = |g: &[f64]| DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(g));
        place(n, &self.h1.transpose(), &diag(&self.g1));
        place(n + na, &self.h1b.transpose(), &diag(&self.g2));
        place(n + na + nb, &self.jp, &(DMatrix::identity(nx, nx) * -zeta));
        out
    }
}

/// Evaluate the LMI blocks for the given certificate data.
pub fn lmi_blocks(
    model: &PlantModel,
    gains: &ControllerGains,
    p: &DMatrix<f64>,
    alpha: f64,
    kappa: &DMatrix<f64>,
    mu: &DMatrix<f64>,
) -> Result<LmiBlocks> {
    let aug = augment(model, gains)?;
    let slices = Slices::new(model);
    let (nx, nu) = (model.n_x(), model.n_u());
    let n = nx + nu;
    let closed = &aug.abar + &aug.bbar * &aug.f * &aug.cbar;
    let pc = p * closed;
    let m = &pc + pc.transpose() + DMatrix::identity(n, n) * alpha;
    let mut penalty = DMatrix::zeros(n, n);
    for &(i, j, _) in &slices.a {
        penalty[(j, j)] += kappa[(i, j)];
    }
    let pj = p * aug.j.transpose();
    let h1 = &pj * row_selector(nx, &slices.a);
    let h1b = &pj * row_selector(nx, &slices.b);
    let r = input_rows(&aug.f, &aug.cbar, nu);
    let mut h2 = DMatrix::zeros(n, slices.b.len());
    for (l, &(_, k, _)) in slices.b.iter().enumerate() {
        h2.set_column(l, &r[k].column(0));
    }
    Ok(LmiBlocks {
        m,
        penalty,
        g1: slices.a.iter().map(|&(i, j, a)| -kappa[(i, j)] / (a * a)).collect(),
        g2: slices.b.iter().map(|&(i, k, b)| -mu[(i, k)] / (b * b)).collect(),
        g3: slices.b.iter().map(|&(i, k, _)| -1.0 / mu[(i, k)]).collect(),
        h1,
        h1b,
        h2,
        jp: &aug.j * p,
    })
}

/// Largest `α` for which the robust LMI holds at fixed `P`, `κ`, `μ`, `ζ`.
///
/// With `κ, μ, ζ > 0` the diagonal blocks are negative definite and the
/// Schur complement gives `α = −λ_max(S)` with
/// `S = Sym(P Ā + P B̄ F C̄) + Σ κ g gᵀ + Σ μ r rᵀ + Σ (a²/κ) h hᵀ + Σ (b²/μ) h hᵀ + ζ⁻¹ P Jᵀ J P`.
pub fn exact_alpha(
    model: &PlantModel,
    gains: &ControllerGains,
    p: &DMatrix<f64>,
    kappa: &DMatrix<f64>,
    mu: &DMatrix<f64>,
    zeta: f64,
) -> Result<f64> {
    if !(zeta > 0.0) {
        return Err(SynthesisError::InvalidOption(format!("zeta must be positive, got {zeta}")));
    }
    let b = lmi_blocks(model, gains, p, 0.0, kappa, mu)?;
    if b.g1.iter().chain(&b.g2).any(|g| !(*g < 0.0)) {
        return Err(SynthesisError::InvalidOption("multipliers must be positive".into()));
    }
    let mut s = b.m_prime();
    for (l, g) in b.g1.iter().enumerate() {
        let c = b.h1.column(l);
        s -= c * c.transpose() / *g;
    }
    for (l, g) in b.g2.iter().enumerate() {
        let c = b.h1b.column(l);
        s -= c * c.transpose() / *g;
    }
    s += b.jp.transpose() * &b.jp / zeta;
    let eig = sym_eigenvalues(&symmetrize(&s))?;
    Ok(-eig.last().copied().unwrap_or(0.0))
}

/// Clamp a solver iterate into the strict domain and recompute `α` exactly.
fn polish(
    model: &PlantModel,
    gains: &ControllerGains,
    p: DMatrix<f64>,
    mut kappa: DMatrix<f64>,
    mut mu: DMatrix<f64>,
    zeta: f64,
) -> Result<Option<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, f64)>> {
    if p.iter().chain(kappa.iter()).chain(mu.iter()).any(|v| !v.is_finite()) {
        return Ok(None);
    }
    let mut p = symmetrize(&p);
    let lo = sym_eigenvalues(&p)?.first().copied().unwrap_or(0.0);
    if lo < STRICT_MARGIN {
        let n = p.nrows();
        p += DMatrix::identity(n, n) * (STRICT_MARGIN - lo);
    }
    for (i, j, _) in nonzero(&model.a_bound) {
        kappa[(i, j)] = kappa[(i, j)].max(STRICT_MARGIN);
    }
    for (i, k, _) in nonzero(&model.b_bound) {
        mu[(i, k)] = mu[(i, k)].max(STRICT_MARGIN);
    }
    let alpha = exact_alpha(model, gains, &p, &kappa, &mu, zeta)?;
    Ok(alpha.is_finite().then_some((p, kappa, mu, alpha)))
}

/// Solver outcomes whose iterate is worth polishing.
fn usable(sol: &SdpSolution) -> bool {
    !matches!(sol.status, SolveStatus::Infeasible | SolveStatus::Unbounded)
}

fn certify_once(
    model: &PlantModel,
    gains: &ControllerGains,
    zeta: f64,
    p_margin: f64,
    opts: &SolverOptions,
) -> Result<(CertificationProgram, SdpSolution)> {
    let prog = assemble_certification_with_margin(model, gains, zeta, p_margin)?;
    let sol = solve(&prog.problem, opts)?;
    Ok((prog, sol))
}

pub fn certify(model: &PlantModel, gains: &ControllerGains, zeta_grid: &[f64]) -> Result<SynthesisCertificate> {
    certify_with(model, gains, zeta_grid, &SolverOptions::default())
}

pub fn certify_with(
    model: &PlantModel,
    gains: &ControllerGains,
    zeta_grid: &[f64],
    opts: &SolverOptions,
) -> Result<SynthesisCertificate> {
    certify_impl(model, gains, zeta_grid, STRICT_MARGIN, opts)
}

fn certify_impl(
    model: &PlantModel,
    gains: &ControllerGains,
    zeta_grid: &[f64],
    p_margin: f64,
    opts: &SolverOptions,
) -> Result<SynthesisCertificate> {
    if zeta_grid.is_empty() {
        return Err(SynthesisError::InvalidOption("empty zeta grid".into()));
    }
    augment(model, gains)?;
    let runs: Vec<Result<(CertificationProgram, SdpSolution)>> = zeta_grid
        .par_iter()
        .map(|&z| certify_once(model, gains, z, p_margin, opts))
        .collect();
    let mut diagnostics = Vec::with_capacity(runs.len());
    let mut best: Option<(f64, f64, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, f64)> = None;
    for run in runs {
        let (prog, sol) = run?;
        let polished = if usable(&sol) {
            polish(
                model,
                gains,
                prog.p.value(&sol.x),
                prog.kappa_matrix(&sol.x),
                prog.mu_matrix(&sol.x),
                prog.zeta,
            )?
        } else {
            None
        };
        diagnostics.push(ZetaDiagnostic {
            zeta: prog.zeta,
            status: sol.status,
            alpha: polished.as_ref().map(|t| t.3),
            iterations: sol.iterations,
            violation: sol.max_constraint_violation,
        });
        if let Some((p, kappa, mu, alpha)) = polished {
            let obj = alpha / prog.zeta;
            if best.as_ref().is_none_or(|b| obj > b.0) {
                best = Some((obj, prog.zeta, p, kappa, mu, alpha));
            }
        }
    }
    let (objective, zeta, p, kappa, mu, alpha) = best.ok_or(SynthesisError::AllSolvesFailed {
        attempts: zeta_grid.len(),
    })?;
    let (_, _, cbar, _) = structure(model);
    let norm_cbar = spectral_norm(&cbar);
    let eps = eps_c_value(model.k_b, norm_cbar, &p, objective);
    Ok(SynthesisCertificate {
        p,
        alpha,
        zeta,
        kappa,
        mu,
        gains: gains.clone(),
        norm_cbar,
        k_b: model.k_b,
        eps_c: eps,
        objective,
        diagnostics,
    })
}

/// Block matrix whose negative semidefiniteness implies `Sym(Yᵀ Z) ⪯ 0`.
///
/// ```text
/// [ Sym(Yᵀ Z_k + Y_kᵀ Z − Y_kᵀ Z_k)   *     *   ]
/// [ Y − Y_k                          −U     *   ]
/// [ Z − Z_k                           0   −U⁻¹  ]
/// ```
pub fn linearize_bilinear(
    y: &AffineMatrix,
    z: &AffineMatrix,
    y_k: &DMatrix<f64>,
    z_k: &DMatrix<f64>,
    u: &DMatrix<f64>,
) -> Result<SymMatrixExpr> {
    if y.shape() != y_k.shape() || z.shape() != z_k.shape() || y.nrows() != z.nrows() || y.ncols() != z.ncols() {
        return Err(SynthesisError::DimensionMismatch(format!(
            "Y {:?}, Z {:?}, Y_k {:?}, Z_k {:?}",
            y.shape(),
            z.shape(),
            y_k.shape(),
            z_k.shape()
        )));
    }
    if u.shape() != (y.nrows(), y.nrows()) {
        return Err(SynthesisError::DimensionMismatch(format!(
            "U is {:?}, expected {r}x{r}",
            u.shape(),
            r = y.nrows()
        )));
    }
    let u_inv = spd_inverse(u)?;
    let lin = y.transpose().mul_right(z_k) + z.mul_left(&y_k.transpose()) + AffineMatrix::constant(-(y_k.transpose() * z_k));
    Ok(arrow(
        lin.sym(),
        vec![
            (y.add_constant(&-y_k), AffineMatrix::constant(-u)),
            (z.add_constant(&-z_k), AffineMatrix::constant(-u_inv)),
        ],
    ))
}

fn spd_inverse(u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = sym_eigenvalues(u)?;
    let lo = eig.first().copied().unwrap_or(0.0);
    if !(lo > 0.0) {
        return Err(SynthesisError::NotPositiveDefinite { min_eig: lo });
    }
    let chol = u.clone().cholesky().ok_or(SynthesisError::NotPositiveDefinite { min_eig: lo })?;
    Ok(symmetrize(&chol.inverse()))
}

/// Linear bound `−2U_k⁻¹ + U_k⁻¹ U U_k⁻¹ ⪰ −U⁻¹`, tight at `U = U_k`.
pub fn inverse_overapprox(u: &DMatrix<f64>, u_k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if u.shape() != u_k.shape() {
        return Err(SynthesisError::DimensionMismatch(format!("U {:?} vs U_k {:?}", u.shape(), u_k.shape())));
    }
    spd_inverse(u)?;
    let inv = spd_inverse(u_k)?;
    Ok(symmetrize(&(&inv * u * &inv - &inv * 2.0)))
}

#[derive(Debug, Clone, PartialEq)]
pub enum VertexResult {
    Verified { vertices: usize },
    Refuted { da: DMatrix<f64>, db: DMatrix<f64>, max_eig: f64 },
    Skipped { entries: usize },
}

impl VertexResult {
    pub fn is_verified(&self) -> bool {
        matches!(self, VertexResult::Verified { .. })
    }
}

/// Vertex matrix `Sym(P(Ā + ΔĀ + (B̄ + ΔB̄) F C̄)) + ζ⁻¹ P Jᵀ J P + α I`.
pub fn vertex_lmi(
    model: &PlantModel,
    gains: &ControllerGains,
    p: &DMatrix<f64>,
    alpha: f64,
    zeta: f64,
    da: &DMatrix<f64>,
    db: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let aug = augment(model, gains)?;
    let n = p.nrows();
    let fc = &aug.f * &aug.cbar;
    let a = &aug.abar + embed_da(da, model.n_u())? + (&aug.bbar + embed_db(db)) * fc;
    let pa = p * a;
    let jp = &aug.j * p;
    Ok(&pa + pa.transpose() + jp.transpose() * jp / zeta + DMatrix::identity(n, n) * alpha)
}

/// Check the robust LMI at every sign vertex of the uncertainty boxes.
pub fn vertex_verify(
    model: &PlantModel,
    gains: &ControllerGains,
    p: &DMatrix<f64>,
    alpha: f64,
    zeta: f64,
    max_entries: usize,
) -> Result<VertexResult> {
    let slices = Slices::new(model);
    let total = slices.a.len() + slices.b.len();
    if total > max_entries || total >= 63 {
        return Ok(VertexResult::Skipped { entries: total });
    }
    augment(model, gains)?;
    let (nx, nu) = (model.n_x(), model.n_u());
    let realize = |mask: u64| {
        let mut da = DMatrix::zeros(nx, nx);
        let mut db = DMatrix::zeros(nx, nu);
        for (bit, &(i, j, a)) in slices.a.iter().enumerate() {
            da[(i, j)] = if mask >> bit & 1 == 1 { a } else { -a };
        }
        let off = slices.a.len();
        for (bit, &(i, k, b)) in slices.b.iter().enumerate() {
            db[(i, k)] = if mask >> (bit + off) & 1 == 1 { b } else { -b };
        }
        (da, db)
    };
    let top = |mask: u64| -> f64 {
        let (da, db) = realize(mask);
        let m = vertex_lmi(model, gains, p, alpha, zeta, &da, &db).expect("dimensions checked");
        sym_eigenvalues(&symmetrize(&m)).ok().and_then(|e| e.last().copied()).unwrap_or(f64::INFINITY)
    };
    let count = 1u64 << total;
    let bad = (0..count).into_par_iter().find_first(|&mask| top(mask) > ORACLE_TOL);
    Ok(match bad {
        None => VertexResult::Verified { vertices: count as usize },
        Some(mask) => {
            let (da, db) = realize(mask);
            VertexResult::Refuted {
                max_eig: top(mask),
                da,
                db,
            }
        }
    })
}

/// Options of [`synthesize`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOptions {
    /// Stop when consecutive accepted objectives differ by at most this.
    pub eps_alg: f64,
    pub max_outer: usize,
    pub zeta_grid: Vec<f64>,
    /// Optional bound `‖F‖ ≤ g`.
    pub gain_bound: Option<f64>,
    pub solver: SolverOptions,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            eps_alg: 1e-4,
            max_outer: 50,
            zeta_grid: default_zeta_grid(),
            gain_bound: None,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub zeta: f64,
    pub alpha: f64,
    pub objective: f64,
    /// Optimal value of the convex step program, a lower bound on `alpha`.
    pub step_alpha: f64,
    pub accepted: bool,
    pub solves: usize,
    pub note: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    /// Objective of the zero-gain initialization.
    pub initial_objective: f64,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

impl IterationTrace {
    /// Objectives of the accepted iterates.
    pub fn accepted_objectives(&self) -> Vec<f64> {
        self.records.iter().filter(|r| r.accepted).map(|r| r.objective).collect()
    }

    /// Best accepted objective.
    pub fn objective(&self) -> f64 {
        self.accepted_objectives().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Linearization point of the sequential convex step.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizationPoint {
    pub p: DMatrix<f64>,
    pub f: DMatrix<f64>,
    /// `μ_ik`, shaped `n_x × n_u`.
    pub mu: DMatrix<f64>,
    pub u: DMatrix<f64>,
}

/// Convex program of one sequential step at a fixed `ζ`; maximises `α`.
#[derive(Debug, Clone)]
pub struct StepProgram {
    pub problem: SdpProblem,
    pub p: MatrixVar,
    pub d_c: MatrixVar,
    pub c_c: MatrixVar,
    pub b_c: MatrixVar,
    pub alpha: ScalarVar,
    pub kappa: Vec<ScalarVar>,
    pub mu: Vec<ScalarVar>,
    pub u: MatrixVar,
}

fn gain_expr(d_c: &MatrixVar, c_c: &MatrixVar, b_c: &MatrixVar, nu: usize, ny: usize) -> AffineMatrix {
    let mut e1 = DMatrix::zeros(2 * nu, nu);
    e1.view_mut((0, 0), (nu, nu)).fill_with_identity();
    let mut e2 = DMatrix::zeros(2 * nu, nu);
    e2.view_mut((nu, 0), (nu, nu)).fill_with_identity();
    let mut r1 = DMatrix::zeros(ny, ny + nu);
    r1.view_mut((0, 0), (ny, ny)).fill_with_identity();
    let mut r2 = DMatrix::zeros(nu, ny + nu);
    r2.view_mut((0, ny), (nu, nu)).fill_with_identity();
    d_c.expr().mul_left(&e1).mul_right(&r1) + c_c.expr().mul_left(&e1).mul_right(&r2) + b_c.expr().mul_left(&e2).mul_right(&r1)
}

pub fn assemble_step(
    model: &PlantModel,
    lin: &LinearizationPoint,
    zeta: f64,
    gain_bound: Option<f64>,
    p_margin: f64,
) -> StepProgram {
    let (abar, bbar, cbar, j) = structure(model);
    let slices = Slices::new(model);
    let (nx, nu, ny) = (model.n_x(), model.n_u(), model.n_y());
    let n = nx + nu;
    let mut problem = SdpProblem::new();
    let pv = problem.add_symmetric("P", n, Restriction::PsdMargin(p_margin));
    let d_c = problem.add_matrix("D_c", nu, ny);
    let c_c = problem.add_matrix("C_c", nu, nu);
    let b_c = problem.add_matrix("B_c", nu, ny);
    let uv = problem.add_symmetric("U", n, Restriction::PsdMargin(STRICT_MARGIN));
    let alpha = problem.add_scalar("alpha", Restriction::Free);
    let p = pv.expr();
    let f = gain_expr(&d_c, &c_c, &b_c, nu, ny);
    let df = f.add_constant(&-&lin.f);
    let unc = uncertainty(&mut problem, &slices, &j, &p);

    let fk_term = &bbar * &lin.f * &cbar;
    let lin_part = p.mul_right(&abar) + df.mul_left(&(&lin.p * &bbar)).mul_right(&cbar) + p.mul_right(&fk_term);
    let top = lin_part.sym() + alpha.times(&DMatrix::identity(n, n)) + unc.penalty.clone();

    // Columns (i,k) of H2_k are μ_k,ik · r_k(F).
    let mut t = DMatrix::zeros(2 * nu, slices.b.len());
    let mut g3_const = Vec::with_capacity(slices.b.len());
    for (l, &(i, k, _)) in slices.b.iter().enumerate() {
        t[(k, l)] = lin.mu[(i, k)];
        g3_const.push(-2.0 * lin.mu[(i, k)]);
    }
    let h2t = f.mul_left(&t.transpose()).mul_right(&cbar);
    let nb = slices.b.len();
    let mut g3 = AffineMatrix::constant(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(g3_const)));
    for (l, v) in unc.mu.iter().enumerate() {
        g3 = g3 + v.times(&unit(nb, l, l));
    }
    let u = uv.expr();
    let dp = p.add_constant(&-&lin.p).mul_left(&lin.u);
    let bfc = df.mul_left(&bbar).mul_right(&cbar);
    let jp = p.mul_left(&j);

    let lmi = arrow(
        top,
        vec![
            (unc.h1t, unc.g1),
            (unc.h1bt, unc.g2),
            (h2t, g3),
            (dp, u.add_constant(&(&lin.u * -2.0))),
            (bfc, -&u),
            (jp, AffineMatrix::constant(DMatrix::identity(nx, nx) * -zeta)),
        ],
    );
    problem.add_nsd("step_lmi", lmi);
    if let Some(g) = gain_bound {
        let (r, c) = (2 * nu, ny + nu);
        let mut b = BlockSym::new(vec![r, c]);
        b.set(0, 0, AffineMatrix::constant(DMatrix::identity(r, r) * -g));
        b.set(1, 0, f.transpose());
        b.set(1, 1, AffineMatrix::constant(DMatrix::identity(c, c) * -g));
        problem.add_nsd("gain_bound", b.build());
    }
    problem.maximize(alpha);
    StepProgram {
        problem,
        p: pv,
        d_c,
        c_c,
        b_c,
        alpha,
        kappa: unc.kappa,
        mu: unc.mu,
        u: uv,
    }
}

struct StepOutcome {
    zeta: f64,
    /// Exact certification `α` of the step's `(P, F, κ, μ)`.
    alpha: f64,
    /// Optimal value of the step program.
    step_alpha: f64,
    next: LinearizationPoint,
}

fn solve_step(
    model: &PlantModel,
    lin: &LinearizationPoint,
    zeta: f64,
    p_margin: f64,
    opts: &SynthesisOptions,
) -> Result<Option<StepOutcome>> {
    let prog = assemble_step(model, lin, zeta, opts.gain_bound, p_margin);
    let sol = solve(&prog.problem, &opts.solver)?;
    if !usable(&sol) {
        return Ok(None);
    }
    let x = &sol.x;
    let gains = ControllerGains {
        d_c: prog.d_c.value(x),
        c_c: prog.c_c.value(x),
        b_c: prog.b_c.value(x),
    };
    let slices = Slices::new(model);
    let (nx, nu) = (model.n_x(), model.n_u());
    let kappa = entries_matrix((nx, nx), &slices.a, &prog.kappa, x);
    let mu = entries_matrix((nx, nu), &slices.b, &prog.mu, x);
    let u = symmetrize(&prog.u.value(x));
    if u.iter().any(|v| !v.is_finite()) || gains.f().iter().any(|v| !v.is_finite()) {
        return Ok(None);
    }
    let Some((p, _, mu, alpha)) = polish(model, &gains, prog.p.value(x), kappa, mu, zeta)? else {
        return Ok(None);
    };
    // U must stay inside (0, 2U_k) for the next step.
    let u_lo = sym_eigenvalues(&u)?.first().copied().unwrap_or(0.0);
    let u = if u_lo >= STRICT_MARGIN {
        u
    } else {
        let n = u.nrows();
        u + DMatrix::identity(n, n) * (STRICT_MARGIN - u_lo)
    };
    let mut mu_next = lin.mu.clone();
    for &(i, k, _) in &slices.b {
        mu_next[(i, k)] = mu[(i, k)];
    }
    Ok(Some(StepOutcome {
        zeta,
        alpha,
        step_alpha: prog.alpha.value(x),
        next: LinearizationPoint {
            p,
            f: gains.f(),
            mu: mu_next,
            u,
        },
    }))
}

fn best_step(
    model: &PlantModel,
    lin: &LinearizationPoint,
    cands: &[(f64, DMatrix<f64>)],
    p_margin: f64,
    opts: &SynthesisOptions,
) -> Result<(Option<StepOutcome>, usize)> {
    let outs: Vec<Result<Option<StepOutcome>>> = cands
        .par_iter()
        .map(|(z, u)| {
            let mut l = lin.clone();
            l.u.clone_from(u);
            solve_step(model, &l, *z, p_margin, opts)
        })
        .collect();
    let mut best: Option<StepOutcome> = None;
    for o in outs {
        if let Some(s) = o? {
            if best.as_ref().is_none_or(|b| s.alpha / s.zeta > b.alpha / b.zeta) {
                best = Some(s);
            }
        }
    }
    Ok((best, cands.len()))
}

/// Replaces `(P, μ)` of a step by the certification optimum for its gains.
fn recenter(model: &PlantModel, step: &mut StepOutcome, p_margin: f64, opts: &SynthesisOptions) -> Result<()> {
    let (nu, ny) = (model.n_u(), model.n_y());
    let gains = ControllerGains::from_f(&step.next.f, nu, ny);
    match certify_impl(model, &gains, &[step.zeta], p_margin, &opts.solver) {
        Ok(c) if c.alpha > step.alpha => {
            step.alpha = c.alpha;
            step.next.p = c.p;
            for (i, k, _) in nonzero(&model.b_bound) {
                step.next.mu[(i, k)] = c.mu[(i, k)];
            }
            Ok(())
        }
        Ok(_) | Err(SynthesisError::AllSolvesFailed { .. }) => Ok(()),
        Err(e) => Err(e),
    }
}

/// Certifies `F_k + t (F − F_k)` for each extrapolation factor and keeps the
/// best point if it beats the step.
fn extrapolate(
    model: &PlantModel,
    f_prev: &DMatrix<f64>,
    step: &mut StepOutcome,
    p_margin: f64,
    opts: &SynthesisOptions,
) -> Result<()> {
    let (nu, ny) = (model.n_u(), model.n_y());
    let dir = &step.next.f - f_prev;
    let runs: Vec<Result<SynthesisCertificate>> = EXTRAPOLATION
        .par_iter()
        .map(|&t| f_prev + &dir * t)
        .filter(|f| within_gain_bound(f, opts.gain_bound))
        .map(|f| {
            let gains = ControllerGains::from_f(&f, nu, ny);
            certify_impl(model, &gains, &[step.zeta], p_margin, &opts.solver)
        })
        .collect();
    for run in runs {
        let c = match run {
            Ok(c) => c,
            Err(SynthesisError::AllSolvesFailed { .. }) => continue,
            Err(e) => return Err(e),
        };
        if c.alpha > step.alpha {
            step.alpha = c.alpha;
            step.next.f = c.gains.f();
            step.next.p = c.p;
            for (i, k, _) in nonzero(&model.b_bound) {
                step.next.mu[(i, k)] = c.mu[(i, k)];
            }
        }
    }
    Ok(())
}

fn within_gain_bound(f: &DMatrix<f64>, bound: Option<f64>) -> bool {
    bound.is_none_or(|g| spectral_norm(f) <= g)
}

/// Low-gain integral action around a static output feedback `D_c`.
///
/// Returns `C_c = I` and `B_c = −ε G₀⁺` with `G₀ = −C (A + B D_c C)⁻¹ B`
/// and `ε` the given fraction of the nominal decay rate of `A + B D_c C`,
/// or `None` when that matrix is not Hurwitz.
pub fn integral_seed(model: &PlantModel, d_c: &DMatrix<f64>, fraction: f64) -> Option<ControllerGains> {
    let acl = &model.a + &model.b * d_c * &model.c;
    let rate = -acl.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if !(rate > 0.0) || !rate.is_finite() {
        return None;
    }
    let inv = acl.try_inverse()?;
    let g0 = -(&model.c * inv * &model.b);
    let pinv = g0.pseudo_inverse(1e-12).ok()?;
    let nu = model.n_u();
    let gains = ControllerGains {
        b_c: pinv * -(fraction * rate),
        c_c: DMatrix::identity(nu, nu),
        d_c: d_c.clone(),
    };
    gains.f().iter().all(|v| v.is_finite()).then_some(gains)
}

fn push_unique(v: &mut Vec<f64>, z: f64) {
    if !v.iter().any(|&w| ((w - z) / z).abs() < 1e-12) {
        v.push(z);
    }
}

/// Zero-gain certificate with `P ⪰ I` and the first linearization point.
pub fn initial_point(model: &PlantModel, opts: &SynthesisOptions) -> Result<(SynthesisCertificate, LinearizationPoint)> {
    let (nx, nu, ny) = (model.n_x(), model.n_u(), model.n_y());
    let zero = ControllerGains::zeros(nu, ny);
    let init = match certify_impl(model, &zero, &opts.zeta_grid, INIT_P_MARGIN, &opts.solver) {
        Ok(c) => c,
        Err(SynthesisError::AllSolvesFailed { attempts }) => {
            return Err(SynthesisError::InitializationInfeasible(format!(
                "no certification solve with zero gains succeeded ({attempts} attempts)"
            )))
        }
        Err(e) => return Err(e),
    };
    let p = condition_init(model, &zero, &init, opts)?.unwrap_or_else(|| init.p.clone());
    let lin = LinearizationPoint {
        p,
        f: zero.f(),
        mu: DMatrix::from_element(nx, nu, 1.0),
        u: DMatrix::identity(nx + nu, nx + nu),
    };
    Ok((init, lin))
}

/// Relative loss in `α` allowed when conditioning the initial `P`.
const INIT_ALPHA_SLACK: f64 = 1e-2;

/// Smallest `λ_max(P)` over `P ⪰ I` keeping `α` within a small fraction of
/// the zero-gain optimum; the optimum itself leaves directions of `P` free.
fn condition_init(
    model: &PlantModel,
    gains: &ControllerGains,
    init: &SynthesisCertificate,
    opts: &SynthesisOptions,
) -> Result<Option<DMatrix<f64>>> {
    let n = init.p.nrows();
    let mut prog = assemble_certification_with_margin(model, gains, init.zeta, INIT_P_MARGIN)?;
    let t = prog.problem.add_scalar("neg_lambda_max", Restriction::Free);
    let cap = prog.p.expr() + t.times(&DMatrix::identity(n, n));
    prog.problem.add_nsd("lambda_max", SymMatrixExpr::from_affine(&cap));
    let floor = init.alpha - INIT_ALPHA_SLACK * init.alpha.abs().max(1e-3);
    let a = prog.alpha.expr().add_constant(&DMatrix::from_element(1, 1, -floor));
    prog.problem.add_psd("alpha_floor", SymMatrixExpr::from_affine(&a));
    prog.problem.maximize(t);
    let sol = solve(&prog.problem, &opts.solver)?;
    if !usable(&sol) {
        return Ok(None);
    }
    let p = symmetrize(&prog.p.value(&sol.x));
    Ok(p.iter().all(|v| v.is_finite()).then_some(p))
}

/// Sequential convex synthesis of `(B_c, C_c, D_c)` maximising `α/ζ`.
pub fn synthesize(
    model: &PlantModel,
    opts: &SynthesisOptions,
) -> Result<(ControllerGains, SynthesisCertificate, IterationTrace)> {
    model.check()?;
    if opts.zeta_grid.is_empty() || opts.zeta_grid.iter().any(|&z| !(z > 0.0) || !z.is_finite()) {
        return Err(SynthesisError::InvalidOption("zeta grid must be nonempty and positive".into()));
    }
    if opts.max_outer == 0 {
        return Err(SynthesisError::InvalidOption("max_outer must be positive".into()));
    }
    let (nx, nu, ny) = (model.n_x(), model.n_u(), model.n_y());
    let n = nx + nu;
    let zero = ControllerGains::zeros(nu, ny);
    let (init, mut lin) = initial_point(model, opts)?;
    let mut zeta = init.zeta;
    let mut objective = f64::NEG_INFINITY;
    let mut best_gains = zero.clone();
    let mut trace = IterationTrace {
        initial_objective: init.objective,
        ..Default::default()
    };
    let zeta_lo = opts.zeta_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let zeta_hi = opts.zeta_grid.iter().copied().fold(0.0, f64::max);
    let mut failures = 0;
    for k in 1..=opts.max_outer {
        // Until the objective is positive, P ⪰ I rules out the collapse P → 0.
        let p_margin = if objective > 0.0 { STRICT_MARGIN } else { INIT_P_MARGIN };
        let mut cands: Vec<(f64, DMatrix<f64>)> = Vec::new();
        let mut zetas = opts.zeta_grid.clone();
        push_unique(&mut zetas, zeta);
        cands.extend(zetas.iter().map(|&z| (z, lin.u.clone())));
        cands.extend(U_SCALES.iter().map(|&s| (zeta, DMatrix::identity(n, n) * s)));
        let (coarse, mut solves) = best_step(model, &lin, &cands, p_margin, opts)?;
        let mut best = coarse;
        if let Some(b) = &best {
            let e = b.zeta.log10();
            let extra: Vec<(f64, DMatrix<f64>)> = [e - 1.0 / 3.0, e + 1.0 / 3.0]
                .iter()
                .map(|x| 10f64.powf(*x))
                .filter(|z| *z >= zeta_lo && *z <= zeta_hi)
                .map(|z| (z, lin.u.clone()))
                .collect();
            let (fine, s) = best_step(model, &lin, &extra, p_margin, opts)?;
            solves += s;
            if let Some(f) = fine {
                if f.alpha / f.zeta > b.alpha / b.zeta {
                    best = Some(f);
                }
            }
        }
        let mut note = String::new();
        if let Some(step) = best.as_mut() {
            solves += 1 + EXTRAPOLATION.len();
            recenter(model, step, p_margin, opts)?;
            extrapolate(model, &lin.f, step, p_margin, opts)?;
        }
        if objective <= 0.0 {
            let d_c = match &best {
                Some(step) => ControllerGains::from_f(&step.next.f, nu, ny).d_c,
                None => ControllerGains::from_f(&lin.f, nu, ny).d_c,
            };
            let seeds: Vec<ControllerGains> = SEED_FRACTIONS
                .iter()
                .filter_map(|&r| integral_seed(model, &d_c, r))
                .filter(|g| within_gain_bound(&g.f(), opts.gain_bound))
                .collect();
            for g in seeds {
                solves += zetas.len();
                let Ok(c) = certify_impl(model, &g, &zetas, p_margin, &opts.solver) else {
                    continue;
                };
                if best.as_ref().is_none_or(|b| c.objective > b.alpha / b.zeta) {
                    note = "integral seed".into();
                    best = Some(StepOutcome {
                        zeta: c.zeta,
                        alpha: c.alpha,
                        step_alpha: f64::NAN,
                        next: LinearizationPoint {
                            p: c.p,
                            f: g.f(),
                            mu: c.mu,
                            u: DMatrix::identity(n, n),
                        },
                    });
                }
            }
        }
        let Some(step) = best else {
            failures += 1;
            trace.records.push(IterationRecord {
                iteration: k,
                zeta,
                alpha: f64::NAN,
                objective: f64::NAN,
                step_alpha: f64::NAN,
                accepted: false,
                solves,
                note: "no step solve succeeded; weight reset".into(),
            });
            lin.u = DMatrix::identity(n, n);
            if failures >= 2 {
                break;
            }
            continue;
        };
        let new_obj = step.alpha / step.zeta;
        let slack = if objective.is_finite() { 1e-9 * objective.abs().max(1.0) } else { 0.0 };
        if new_obj + slack < objective {
            failures += 1;
            trace.records.push(IterationRecord {
                iteration: k,
                zeta: step.zeta,
                alpha: step.alpha,
                objective: new_obj,
                step_alpha: step.step_alpha,
                accepted: false,
                solves,
                note: "objective decreased; weight reset".into(),
            });
            lin.u = DMatrix::identity(n, n);
            if failures >= 2 {
                break;
            }
            continue;
        }
        failures = 0;
        let previous = objective;
        let improvement = new_obj - objective;
        trace.records.push(IterationRecord {
            iteration: k,
            zeta: step.zeta,
            alpha: step.alpha,
            objective: new_obj,
            step_alpha: step.step_alpha,
            accepted: true,
            solves,
            note,
        });
        lin = step.next;
        zeta = step.zeta;
        objective = objective.max(new_obj);
        best_gains = ControllerGains::from_f(&lin.f, nu, ny);
        // Below zero the objective scale is arbitrary, so the test is relative.
        let threshold = if previous > 0.0 {
            opts.eps_alg
        } else {
            opts.eps_alg * previous.abs()
        };
        if previous.is_finite() && improvement.abs() <= threshold {
            trace.converged = true;
            break;
        }
    }
    let mut grid = opts.zeta_grid.clone();
    push_unique(&mut grid, zeta);
    let cert = certify_impl(model, &best_gains, &grid, STRICT_MARGIN, &opts.solver)?;
    if !cert.certified() {
        return Err(SynthesisError::StalledBelowZero {
            objective: cert.objective,
            certificate: Box::new(cert),
            trace,
        });
    }
    Ok((best_gains, cert, trace))
}
