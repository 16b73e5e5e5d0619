use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robreg_conic::{
    min_eig, solve, AffineMatrix, Restriction, SdpProblem, SolveStatus, SolverOptions,
    SymMatrixExpr,
};

fn lyapunov_problem(a: &DMatrix<f64>) -> (SdpProblem, robreg_conic::MatrixVar) {
    let n = a.nrows();
    let mut p = SdpProblem::new();
    let pv = p.add_symmetric("P", n, Restriction::PsdMargin(0.0));
    let pe = pv.expr();
    let lhs = pe.mul_left(&a.transpose()) + pe.mul_right(a);
    p.add_nsd(
        "lyap",
        SymMatrixExpr::from_affine(&lhs.add_constant(&DMatrix::identity(n, n))),
    );
    (p, pv)
}

/// Solution of `AᵀP + PA = −Q` through the Kronecker-vectorised linear system.
fn lyap_oracle(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let k = id.kronecker(&at) + at.kronecker(&id);
    let rhs = nalgebra::DVector::from_iterator(n * n, (-q).iter().copied());
    let v = k.lu().solve(&rhs).expect("nonsingular Lyapunov operator");
    DMatrix::from_column_slice(n, n, v.as_slice())
}

fn max_re_eig(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn bounded_scalar_is_feasible() {
    let mut p = SdpProblem::new();
    let x = p.add_scalar("x", Restriction::AtLeast(0.0));
    p.add_nsd(
        "x<=1",
        SymMatrixExpr::from_affine(&x.expr().add_constant(&DMatrix::from_element(1, 1, -1.0))),
    );
    let tol = 1e-8;
    let sol = solve(&p, &SolverOptions::with_tol(tol, 200)).unwrap();
    assert_eq!(sol.status, SolveStatus::Feasible);
    let v = x.value(&sol.x);
    assert!(v <= 1.0 + tol && v >= -tol, "x = {v}");
}

#[test]
fn maximize_scalar_reaches_bound() {
    let mut p = SdpProblem::new();
    let x = p.add_scalar("x", Restriction::Free);
    p.add_nsd(
        "x<=2",
        SymMatrixExpr::from_affine(&x.expr().add_constant(&DMatrix::from_element(1, 1, -2.0))),
    );
    p.maximize(x);
    let sol = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.objective_value - 2.0).abs() < 1e-6);
}

#[test]
fn unbounded_objective_is_reported() {
    let mut p = SdpProblem::new();
    let x = p.add_scalar("x", Restriction::AtLeast(0.0));
    p.maximize(x);
    let sol = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Unbounded);
}

#[test]
fn stable_lyapunov_matches_closed_form() {
    let a = -DMatrix::<f64>::identity(2, 2);
    let (p, pv) = lyapunov_problem(&a);
    let sol = solve(&p, &SolverOptions::default()).unwrap();
    assert!(sol.status.is_feasible(), "{:?}", sol.status);
    let pm = pv.value(&sol.x);
    let lhs = a.transpose() * &pm + &pm * &a + DMatrix::identity(2, 2);
    assert!(-min_eig(&(-lhs)).unwrap() <= 1e-8);
    // The analytic certificate is ∫ e^{Aᵀt} e^{At} dt = I/2.
    let oracle = lyap_oracle(&a, &DMatrix::identity(2, 2));
    assert!((oracle - DMatrix::identity(2, 2) * 0.5).amax() < 1e-14);
}

#[test]
fn unstable_lyapunov_is_infeasible() {
    let a = DMatrix::<f64>::identity(2, 2);
    let (p, _) = lyapunov_problem(&a);
    let sol = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Infeasible);
}

#[test]
fn random_lyapunov_statuses() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..30 {
        let n = rng.random_range(2..=4);
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let shift = max_re_eig(&m);
        let stable = case % 2 == 0;
        let a = &m - DMatrix::identity(n, n) * (shift + if stable { 0.5 } else { -0.5 });
        let (p, pv) = lyapunov_problem(&a);
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        if stable {
            let oracle = lyap_oracle(&a, &DMatrix::identity(n, n));
            assert!(min_eig(&(&oracle + oracle.transpose()) ).unwrap() > 0.0);
            assert!(sol.status.is_feasible(), "case {case}: {:?}", sol.status);
            assert!(sol.max_constraint_violation <= 1e-7);
            let pm = pv.value(&sol.x);
            assert!(min_eig(&pm).unwrap() >= -1e-7);
        } else {
            assert_eq!(sol.status, SolveStatus::Infeasible, "case {case}");
        }
    }
}

#[test]
fn soundness_on_random_maximisations() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let n = rng.random_range(2..=5);
        let mut p = SdpProblem::new();
        let t = p.add_scalar("t", Restriction::Free);
        let y = p.add_scalar("y", Restriction::Free);
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let c = -(&g * g.transpose()) - DMatrix::identity(n, n);
        let f = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let f = &f + f.transpose();
        let e = AffineMatrix::constant(c) + t.times(&DMatrix::identity(n, n)) + y.times(&f);
        p.add_nsd("lmi", SymMatrixExpr::from_affine(&e));
        p.add_nsd(
            "y",
            SymMatrixExpr::from_affine(&y.expr().scalar_times(&DMatrix::from_element(1, 1, 1.0)).add_constant(&DMatrix::from_element(1, 1, -3.0))),
        );
        p.add_psd(
            "y>=-3",
            SymMatrixExpr::from_affine(&y.expr().add_constant(&DMatrix::from_element(1, 1, 3.0))),
        );
        p.maximize(t);
        let tol = 1e-8;
        let sol = solve(&p, &SolverOptions::with_tol(tol, 200)).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.max_constraint_violation <= 10.0 * tol);
        // At the optimum the LMI is singular.
        let m = e.eval(&sol.x);
        let top = -min_eig(&(-m)).unwrap();
        assert!(top.abs() < 1e-5, "top eigenvalue {top}");
    }
}
