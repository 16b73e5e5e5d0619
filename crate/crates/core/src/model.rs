//! Plant models, regulation tasks, controller gains and the augmented
//! closed-loop matrices.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("bound matrix {which} has negative entry {value} at ({row}, {col})")]
    NegativeBound {
        which: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("negative nonlinearity bound k_b = {0}")]
    NegativeKb(f64),
    #[error("no equilibrium for this realization (residual {residual:.3e})")]
    Infeasible { residual: f64 },
    #[error("C_c is rank deficient (singular value ratio {ratio:.3e})")]
    RankDeficient { ratio: f64 },
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Relative singular-value threshold for the rank of `C_c`.
pub const RANK_TOL: f64 = 1e-8;
/// Absolute residual accepted for the stacked equilibrium system.
pub const EQUILIBRIUM_TOL: f64 = 1e-7;

/// Uncertain plant `ẋ = A*x + B*u + k*(x)`, `y = Cx` with element-wise
/// bounds `|A* − A| ≤ A_b`, `|B* − B| ≤ B_b` and increment bound `k_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub a_bound: DMatrix<f64>,
    pub b_bound: DMatrix<f64>,
    pub k_b: f64,
}

impl PlantModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        a_bound: DMatrix<f64>,
        b_bound: DMatrix<f64>,
        k_b: f64,
    ) -> Result<Self> {
        let m = Self {
            a,
            b,
            c,
            a_bound,
            b_bound,
            k_b,
        };
        m.check()?;
        Ok(m)
    }

    /// Model with no uncertainty and no nonlinearity.
    pub fn nominal(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let ab = DMatrix::zeros(a.nrows(), a.ncols());
        let bb = DMatrix::zeros(b.nrows(), b.ncols());
        Self::new(a, b, c, ab, bb, 0.0)
    }

    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_y(&self) -> usize {
        self.c.nrows()
    }

    /// Dimension and sign checks.
    pub fn check(&self) -> Result<()> {
        let n = self.a.nrows();
        let dim = |ok: bool, msg: String| if ok { Ok(()) } else { Err(ModelError::DimensionMismatch(msg)) };
        dim(self.a.is_square(), format!("A is {}x{}", self.a.nrows(), self.a.ncols()))?;
        dim(self.b.nrows() == n, format!("B has {} rows, expected {n}", self.b.nrows()))?;
        dim(self.c.ncols() == n, format!("C has {} columns, expected {n}", self.c.ncols()))?;
        dim(
            self.a_bound.shape() == self.a.shape(),
            format!("A_b is {:?}, expected {:?}", self.a_bound.shape(), self.a.shape()),
        )?;
        dim(
            self.b_bound.shape() == self.b.shape(),
            format!("B_b is {:?}, expected {:?}", self.b_bound.shape(), self.b.shape()),
        )?;
        for (which, m) in [("A_b", &self.a_bound), ("B_b", &self.b_bound)] {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    let v = m[(i, j)];
                    if !(v >= 0.0) {
                        return Err(ModelError::NegativeBound {
                            which,
                            row: i,
                            col: j,
                            value: v,
                        });
                    }
                }
            }
        }
        if !(self.k_b >= 0.0) {
            return Err(ModelError::NegativeKb(self.k_b));
        }
        Ok(())
    }

    /// Number of nonzero entries in `A_b` and `B_b`.
    pub fn uncertain_entries(&self) -> usize {
        self.a_bound.iter().chain(self.b_bound.iter()).filter(|v| **v > 0.0).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegulationTask {
    pub y_d: DVector<f64>,
    pub epsilon_request: f64,
}

impl RegulationTask {
    pub fn new(y_d: DVector<f64>) -> Self {
        Self {
            y_d,
            epsilon_request: 0.0,
        }
    }
}

/// Controller `ẇ = B_c(y − y_d)`, `u = C_c w + D_c(y − y_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    pub b_c: DMatrix<f64>,
    pub c_c: DMatrix<f64>,
    pub d_c: DMatrix<f64>,
}

impl ControllerGains {
    pub fn zeros(n_u: usize, n_y: usize) -> Self {
        Self {
            b_c: DMatrix::zeros(n_u, n_y),
            c_c: DMatrix::zeros(n_u, n_u),
            d_c: DMatrix::zeros(n_u, n_y),
        }
    }

    pub fn n_u(&self) -> usize {
        self.c_c.nrows()
    }

    pub fn n_y(&self) -> usize {
        self.b_c.ncols()
    }

    pub fn check_dims(&self, model: &PlantModel) -> Result<()> {
        let (nu, ny) = (model.n_u(), model.n_y());
        let ok = self.b_c.shape() == (nu, ny) && self.c_c.shape() == (nu, nu) && self.d_c.shape() == (nu, ny);
        if ok {
            Ok(())
        } else {
            Err(ModelError::DimensionMismatch(format!(
                "gains B_c {:?}, C_c {:?}, D_c {:?} do not match n_u = {nu}, n_y = {ny}",
                self.b_c.shape(),
                self.c_c.shape(),
                self.d_c.shape()
            )))
        }
    }

    /// Full column rank of `C_c` by relative singular-value threshold.
    pub fn check_rank(&self) -> Result<()> {
        let sv = self.c_c.clone().svd(false, false).singular_values;
        let hi = sv.iter().copied().fold(0.0, f64::max);
        let lo = sv.iter().copied().fold(f64::INFINITY, f64::min);
        let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
        if self.c_c.ncols() == 0 || ratio > RANK_TOL {
            Ok(())
        } else {
            Err(ModelError::RankDeficient { ratio })
        }
    }

    /// `F = [[D_c, C_c], [B_c, 0]]`.
    pub fn f(&self) -> DMatrix<f64> {
        let (nu, ny) = (self.n_u(), self.n_y());
        let mut f = DMatrix::zeros(2 * nu, ny + nu);
        f.view_mut((0, 0), (nu, ny)).copy_from(&self.d_c);
        f.view_mut((0, ny), (nu, nu)).copy_from(&self.c_c);
        f.view_mut((nu, 0), (nu, ny)).copy_from(&self.b_c);
        f
    }

    /// `F̂ = [[D_c, C_c], [0, 0]]`.
    pub fn f_hat(&self) -> DMatrix<f64> {
        let (nu, ny) = (self.n_u(), self.n_y());
        let mut f = DMatrix::zeros(2 * nu, ny + nu);
        f.view_mut((0, 0), (nu, ny)).copy_from(&self.d_c);
        f.view_mut((0, ny), (nu, nu)).copy_from(&self.c_c);
        f
    }

    /// Inverse of [`ControllerGains::f`]; the bottom-right block is ignored.
    pub fn from_f(f: &DMatrix<f64>, n_u: usize, n_y: usize) -> Self {
        Self {
            d_c: f.view((0, 0), (n_u, n_y)).into_owned(),
            c_c: f.view((0, n_y), (n_u, n_u)).into_owned(),
            b_c: f.view((n_u, 0), (n_u, n_y)).into_owned(),
        }
    }
}

/// Matrices of the closed loop in the coordinates `z = (x, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSystem {
    pub abar: DMatrix<f64>,
    pub bbar: DMatrix<f64>,
    pub cbar: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub fhat: DMatrix<f64>,
}

impl AugmentedSystem {
    /// Nominal closed-loop matrix `Ā + B̄ F C̄`.
    pub fn closed_loop(&self) -> DMatrix<f64> {
        &self.abar + &self.bbar * &self.f * &self.cbar
    }
}

fn blkdiag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    m
}

/// `(Ā, B̄, C̄, J)` only; they do not depend on the gains.
pub fn structure(model: &PlantModel) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (nx, nu) = (model.n_x(), model.n_u());
    let id = DMatrix::identity(nu, nu);
    let abar = blkdiag(&model.a, &DMatrix::zeros(nu, nu));
    let bbar = blkdiag(&model.b, &id);
    let cbar = blkdiag(&model.c, &id);
    let mut j = DMatrix::zeros(nx, nx + nu);
    j.view_mut((0, 0), (nx, nx)).fill_with_identity();
    (abar, bbar, cbar, j)
}

pub fn augment(model: &PlantModel, gains: &ControllerGains) -> Result<AugmentedSystem> {
    model.check()?;
    gains.check_dims(model)?;
    let (abar, bbar, cbar, j) = structure(model);
    Ok(AugmentedSystem {
        abar,
        bbar,
        cbar,
        j,
        f: gains.f(),
        fhat: gains.f_hat(),
    })
}

/// `dA` in the top-left block of an `(n_x+n_u)` square zero matrix.
pub fn embed_da(da: &DMatrix<f64>, n_u: usize) -> Result<DMatrix<f64>> {
    if !da.is_square() {
        return Err(ModelError::DimensionMismatch(format!("dA is {:?}", da.shape())));
    }
    let n = da.nrows() + n_u;
    let mut m = DMatrix::zeros(n, n);
    m.view_mut((0, 0), da.shape()).copy_from(da);
    Ok(m)
}

/// `dB` in the top-left block of an `(n_x+n_u)×(2n_u)` zero matrix.
pub fn embed_db(db: &DMatrix<f64>) -> DMatrix<f64> {
    let (nx, nu) = db.shape();
    let mut m = DMatrix::zeros(nx + nu, 2 * nu);
    m.view_mut((0, 0), (nx, nu)).copy_from(db);
    m
}

/// Nonlinear term `k*(x)` of a realization.
#[derive(Clone)]
pub enum Nonlinearity {
    None,
    Constant(DVector<f64>),
    /// `k(x)_i = amplitude · sin(x_i)`.
    Sinusoid { amplitude: f64 },
    Custom(Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>),
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::None => write!(f, "None"),
            Nonlinearity::Constant(v) => write!(f, "Constant({:?})", v.as_slice()),
            Nonlinearity::Sinusoid { amplitude } => write!(f, "Sinusoid {{ amplitude: {amplitude} }}"),
            Nonlinearity::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Nonlinearity {
    /// The preset `k(x) = k_b/2 · sin(x)`, applied coordinate-wise.
    pub fn sinusoid(k_b: f64) -> Self {
        Nonlinearity::Sinusoid { amplitude: k_b / 2.0 }
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Nonlinearity::None => DVector::zeros(x.len()),
            Nonlinearity::Constant(v) => v.clone(),
            Nonlinearity::Sinusoid { amplitude } => x.map(|v| amplitude * v.sin()),
            Nonlinearity::Custom(f) => f(x),
        }
    }

    /// Euclidean increment bound `sup ‖k(x₁) − k(x₂)‖` when known in closed form.
    pub fn increment_bound(&self, n_x: usize) -> Option<f64> {
        match self {
            Nonlinearity::None | Nonlinearity::Constant(_) => Some(0.0),
            Nonlinearity::Sinusoid { amplitude } => Some(2.0 * amplitude * (n_x as f64).sqrt()),
            Nonlinearity::Custom(_) => None,
        }
    }
}

/// One admissible plant: perturbations inside the boxes plus a nonlinearity.
#[derive(Debug, Clone)]
pub struct UncertaintyRealization {
    pub da: DMatrix<f64>,
    pub db: DMatrix<f64>,
    pub nonlinearity: Nonlinearity,
}

impl UncertaintyRealization {
    pub fn nominal(model: &PlantModel) -> Self {
        Self {
            da: DMatrix::zeros(model.n_x(), model.n_x()),
            db: DMatrix::zeros(model.n_x(), model.n_u()),
            nonlinearity: Nonlinearity::None,
        }
    }

    pub fn in_box(&self, model: &PlantModel) -> bool {
        self.da.shape() == model.a_bound.shape()
            && self.db.shape() == model.b_bound.shape()
            && self.da.iter().zip(model.a_bound.iter()).all(|(d, b)| d.abs() <= *b)
            && self.db.iter().zip(model.b_bound.iter()).all(|(d, b)| d.abs() <= *b)
    }

    pub fn a_star(&self, model: &PlantModel) -> DMatrix<f64> {
        &model.a + &self.da
    }

    pub fn b_star(&self, model: &PlantModel) -> DMatrix<f64> {
        &model.b + &self.db
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<(String, bool)>,
    pub equilibrium_residual: f64,
    pub equilibrium: Option<(DVector<f64>, DVector<f64>)>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }
}

/// Minimum-norm least-squares solution of `[C 0; A B] [x; u] = [y_d; −k]`
/// and its residual norm.
fn stacked_solve(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    y_d: &DVector<f64>,
    k: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>, f64) {
    let (nx, nu, ny) = (a.nrows(), b.ncols(), c.nrows());
    let mut m = DMatrix::zeros(ny + nx, nx + nu);
    m.view_mut((0, 0), (ny, nx)).copy_from(c);
    m.view_mut((ny, 0), (nx, nx)).copy_from(a);
    m.view_mut((ny, nx), (nx, nu)).copy_from(b);
    let mut rhs = DVector::zeros(ny + nx);
    rhs.rows_mut(0, ny).copy_from(y_d);
    rhs.rows_mut(ny, nx).copy_from(&(-k));
    let svd = m.clone().svd(true, true);
    let eps = svd.singular_values.iter().copied().fold(0.0, f64::max) * 1e-12 * (nx + nu + ny) as f64;
    let sol = svd.solve(&rhs, eps).unwrap_or_else(|_| DVector::zeros(nx + nu));
    let residual = (&m * &sol - &rhs).norm();
    (sol.rows(0, nx).into_owned(), sol.rows(nx, nu).into_owned(), residual)
}

pub fn validate_model(model: &PlantModel, task: &RegulationTask) -> Result<ValidationReport> {
    model.check()?;
    if task.y_d.len() != model.n_y() {
        return Err(ModelError::DimensionMismatch(format!(
            "y_d has length {}, expected n_y = {}",
            task.y_d.len(),
            model.n_y()
        )));
    }
    let mut checks = vec![
        ("dimensions".to_string(), true),
        ("nonnegative bounds".to_string(), true),
    ];
    let mut warnings = Vec::new();
    if model.n_u() < model.n_y() {
        warnings.push(format!(
            "n_u = {} < n_y = {}: the equilibrium equations are typically not solvable",
            model.n_u(),
            model.n_y()
        ));
    }
    let k0 = DVector::zeros(model.n_x());
    let (x, u, residual) = stacked_solve(&model.a, &model.b, &model.c, &task.y_d, &k0);
    let ok = residual <= EQUILIBRIUM_TOL;
    checks.push(("nominal equilibrium".to_string(), ok));
    if !ok {
        warnings.push(format!("nominal equilibrium residual {residual:.3e} exceeds {EQUILIBRIUM_TOL:e}"));
    }
    Ok(ValidationReport {
        checks,
        equilibrium_residual: residual,
        equilibrium: ok.then_some((x, u)),
        warnings,
    })
}

/// Equilibrium `(x_d, u_d)` of the realization `(A + dA, B + dB)` with the
/// nonlinearity frozen at `k_const`.
pub fn nominal_equilibrium(
    model: &PlantModel,
    y_d: &DVector<f64>,
    da: &DMatrix<f64>,
    db: &DMatrix<f64>,
    k_const: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    equilibrium_with_tol(model, y_d, da, db, k_const, EQUILIBRIUM_TOL)
}

pub fn equilibrium_with_tol(
    model: &PlantModel,
    y_d: &DVector<f64>,
    da: &DMatrix<f64>,
    db: &DMatrix<f64>,
    k_const: &DVector<f64>,
    tol: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    model.check()?;
    if y_d.len() != model.n_y() || k_const.len() != model.n_x() || da.shape() != model.a.shape() || db.shape() != model.b.shape() {
        return Err(ModelError::DimensionMismatch("equilibrium inputs".into()));
    }
    let a = &model.a + da;
    let b = &model.b + db;
    let (x, u, residual) = stacked_solve(&a, &b, &model.c, y_d, k_const);
    if residual <= tol {
        Ok((x, u))
    } else {
        Err(ModelError::Infeasible { residual })
    }
}

/// Controller state `w_d` with `C_c w_d = u_d − D_c(y_d − C x_d)`.
pub fn controller_equilibrium(
    model: &PlantModel,
    gains: &ControllerGains,
    y_d: &DVector<f64>,
    x_d: &DVector<f64>,
    u_d: &DVector<f64>,
) -> Result<DVector<f64>> {
    gains.check_dims(model)?;
    gains.check_rank()?;
    let rhs = u_d - &gains.d_c * (y_d - &model.c * x_d);
    let svd = gains.c_c.clone().svd(true, true);
    svd.solve(&rhs, 0.0)
        .map_err(|e| ModelError::DimensionMismatch(e.to_string()))
}

/// Right-hand side `(ẋ, ẇ)` of the continuous closed loop.
pub fn closed_loop_rhs(
    model: &PlantModel,
    gains: &ControllerGains,
    real: &UncertaintyRealization,
    y_d: &DVector<f64>,
    x: &DVector<f64>,
    w: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let e = &model.c * x - y_d;
    let u = &gains.c_c * w + &gains.d_c * &e;
    let xdot = real.a_star(model) * x + real.b_star(model) * u + real.nonlinearity.eval(x);
    let wdot = &gains.b_c * e;
    (xdot, wdot)
}

/// The plant of the numerical example: four states, two inputs, two outputs
/// and element-wise uncertainty of 0.1.
pub fn example1() -> (PlantModel, RegulationTask) {
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[
            1.40, -0.21, 6.71, -5.68, //
            -0.58, -4.29, 0.0, 0.67, //
            1.07, 4.27, -6.65, 5.89, //
            0.05, 4.27, 1.34, -2.10,
        ],
    );
    let b = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 5.68, 0.0, 1.14, -3.15, 1.14, 0.0]);
    let c = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 1.0, -1.0, 0.0, 1.0, 0.0, 0.0]);
    let model = PlantModel {
        a,
        b,
        c,
        a_bound: DMatrix::from_element(4, 4, 0.1),
        b_bound: DMatrix::from_element(4, 2, 0.1),
        k_b: 0.0,
    };
    (model, RegulationTask::new(DVector::from_vec(vec![9.0, 10.0])))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64, c: f64) -> PlantModel {
        PlantModel::nominal(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, c),
        )
        .unwrap()
    }

    #[test]
    fn augment_scalar_blocks() {
        let m = PlantModel::nominal(
            DMatrix::from_element(1, 1, 2.0),
            DMatrix::from_element(1, 1, 3.0),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let g = ControllerGains {
            b_c: DMatrix::from_element(1, 1, 4.0),
            c_c: DMatrix::from_element(1, 1, 5.0),
            d_c: DMatrix::from_element(1, 1, 6.0),
        };
        let s = augment(&m, &g).unwrap();
        assert_eq!(s.abar, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]));
        assert_eq!(s.bbar, DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]));
        assert_eq!(s.cbar, DMatrix::identity(2, 2));
        assert_eq!(s.f, DMatrix::from_row_slice(2, 2, &[6.0, 5.0, 4.0, 0.0]));
        assert_eq!(s.fhat, DMatrix::from_row_slice(2, 2, &[6.0, 5.0, 0.0, 0.0]));
    }

    #[test]
    fn zero_gains_give_zero_f() {
        let m = scalar(1.0, 1.0, 1.0);
        let s = augment(&m, &ControllerGains::zeros(1, 1)).unwrap();
        assert_eq!(s.f, DMatrix::zeros(2, 2));
        assert_eq!(s.fhat, s.f);
    }

    #[test]
    fn embeddings() {
        let da = DMatrix::from_element(1, 1, 0.3);
        assert_eq!(embed_da(&da, 1).unwrap(), DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 0.0]));
        let db = DMatrix::from_element(1, 1, 0.2);
        assert_eq!(embed_db(&db), DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.0, 0.0]));
        assert_eq!(embed_da(&DMatrix::zeros(2, 2), 1).unwrap(), DMatrix::zeros(3, 3));
    }

    #[test]
    fn negative_bound_rejected() {
        let mut m = scalar(0.0, 1.0, 1.0);
        m.a_bound[(0, 0)] = -0.1;
        assert!(matches!(m.check(), Err(ModelError::NegativeBound { which: "A_b", .. })));
    }

    #[test]
    fn scalar_equilibrium() {
        let m = scalar(-1.0, 1.0, 1.0);
        let y = DVector::from_element(1, 2.0);
        let z = DMatrix::zeros(1, 1);
        let (x, u) = nominal_equilibrium(&m, &y, &z, &z, &DVector::zeros(1)).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12 && (u[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_equilibrium() {
        let m = scalar(0.0, 0.0, 1.0);
        let y = DVector::zeros(1);
        let z = DMatrix::zeros(1, 1);
        let r = nominal_equilibrium(&m, &y, &z, &z, &DVector::from_element(1, 1.0));
        assert!(matches!(r, Err(ModelError::Infeasible { .. })));
    }

    #[test]
    fn unreachable_output_warns() {
        let m = scalar(0.0, 1.0, 0.0);
        let rep = validate_model(&m, &RegulationTask::new(DVector::from_element(1, 1.0))).unwrap();
        assert!((rep.equilibrium_residual - 1.0).abs() < 1e-12);
        assert!(!rep.warnings.is_empty());
    }

    #[test]
    fn zero_system_validates() {
        let m = scalar(0.0, 1.0, 1.0);
        let rep = validate_model(&m, &RegulationTask::new(DVector::zeros(1))).unwrap();
        assert!(rep.passed());
        let (x, u) = rep.equilibrium.unwrap();
        assert_eq!((x[0], u[0]), (0.0, 0.0));
    }

    #[test]
    fn rank_check() {
        let mut g = ControllerGains::zeros(2, 2);
        assert!(g.check_rank().is_err());
        g.c_c = DMatrix::identity(2, 2);
        assert!(g.check_rank().is_ok());
    }
}
