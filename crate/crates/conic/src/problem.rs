//! Semidefinite programs over scalar and matrix decision variables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{ConicError, Result};
use crate::expr::{AffineMatrix, SymMatrixExpr};
use crate::linalg::sorted_eigenvalues;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarKind {
    Scalar,
    Symmetric(usize),
    Matrix(usize, usize),
}

/// Sign or definiteness restriction attached to a declared variable.
///
/// For scalars `AtLeast(m)` and `PsdMargin(m)` both mean `x ≥ m`. For
/// symmetric matrices `PsdMargin(m)` means `X ⪰ m·I`. Rectangular matrices
/// accept only `Free`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Restriction {
    Free,
    AtLeast(f64),
    PsdMargin(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub kind: VarKind,
    pub restriction: Restriction,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// `expr ⪯ 0`
    Nsd,
    /// `expr ⪰ 0`
    Psd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub expr: SymMatrixExpr,
    pub sense: Sense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScalarVar(usize);

impl ScalarVar {
    pub fn index(self) -> usize {
        self.0
    }

    /// The variable as a 1×1 expression.
    pub fn expr(self) -> AffineMatrix {
        AffineMatrix::term(self.0, DMatrix::from_element(1, 1, 1.0))
    }

    /// `x · m`.
    pub fn times(self, m: &DMatrix<f64>) -> AffineMatrix {
        AffineMatrix::term(self.0, m.clone())
    }

    pub fn value(self, x: &[f64]) -> f64 {
        x[self.0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixVar {
    offset: usize,
    rows: usize,
    cols: usize,
    symmetric: bool,
}

impl MatrixVar {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn scalar_indices(&self) -> Range<usize> {
        let len = if self.symmetric {
            self.rows * (self.rows + 1) / 2
        } else {
            self.rows * self.cols
        };
        self.offset..self.offset + len
    }

    /// Scalar index of entry `(i, j)`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        assert!(i < self.rows && j < self.cols, "entry out of range");
        if self.symmetric {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            // Upper triangle, row by row.
            self.offset + a * self.rows - a * (a + 1) / 2 + b
        } else {
            self.offset + i * self.cols + j
        }
    }

    pub fn expr(&self) -> AffineMatrix {
        let mut out = AffineMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let j0 = if self.symmetric { i } else { 0 };
            for j in j0..self.cols {
                let mut e = DMatrix::zeros(self.rows, self.cols);
                e[(i, j)] = 1.0;
                if self.symmetric {
                    e[(j, i)] = 1.0;
                }
                out = &out + &AffineMatrix::term(self.index(i, j), e);
            }
        }
        out
    }

    pub fn value(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| x[self.index(i, j)])
    }

    /// Write `m` into the scalar assignment `x`.
    pub fn assign(&self, m: &DMatrix<f64>, x: &mut [f64]) {
        assert_eq!(m.shape(), (self.rows, self.cols));
        for i in 0..self.rows {
            for j in 0..self.cols {
                x[self.index(i, j)] = m[(i, j)];
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SdpProblem {
    vars: Vec<VarDecl>,
    n_scalars: usize,
    constraints: Vec<Constraint>,
    objective: BTreeMap<usize, f64>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    fn declare(&mut self, name: &str, kind: VarKind, restriction: Restriction, len: usize) -> usize {
        let offset = self.n_scalars;
        self.vars.push(VarDecl {
            name: name.to_string(),
            kind,
            restriction,
            offset,
            len,
        });
        self.n_scalars += len;
        offset
    }

    pub fn add_scalar(&mut self, name: &str, restriction: Restriction) -> ScalarVar {
        ScalarVar(self.declare(name, VarKind::Scalar, restriction, 1))
    }

    pub fn add_symmetric(&mut self, name: &str, dim: usize, restriction: Restriction) -> MatrixVar {
        let offset = self.declare(name, VarKind::Symmetric(dim), restriction, dim * (dim + 1) / 2);
        MatrixVar {
            offset,
            rows: dim,
            cols: dim,
            symmetric: true,
        }
    }

    pub fn add_matrix(&mut self, name: &str, rows: usize, cols: usize) -> MatrixVar {
        let offset = self.declare(name, VarKind::Matrix(rows, cols), Restriction::Free, rows * cols);
        MatrixVar {
            offset,
            rows,
            cols,
            symmetric: false,
        }
    }

    /// Require `expr ⪯ 0`. A non-symmetric square expression is symmetrised.
    pub fn add_nsd(&mut self, name: &str, expr: SymMatrixExpr) {
        self.constraints.push(Constraint {
            name: name.to_string(),
            expr,
            sense: Sense::Nsd,
        });
    }

    /// Require `expr ⪰ 0`.
    pub fn add_psd(&mut self, name: &str, expr: SymMatrixExpr) {
        self.constraints.push(Constraint {
            name: name.to_string(),
            expr,
            sense: Sense::Psd,
        });
    }

    /// Add `coeff · x_index` to the maximised objective.
    pub fn add_objective(&mut self, index: usize, coeff: f64) {
        *self.objective.entry(index).or_insert(0.0) += coeff;
    }

    pub fn maximize(&mut self, v: ScalarVar) {
        self.objective.clear();
        self.add_objective(v.index(), 1.0);
    }

    pub fn n_scalars(&self) -> usize {
        self.n_scalars
    }

    pub fn variables(&self) -> &[VarDecl] {
        &self.vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &BTreeMap<usize, f64> {
        &self.objective
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|(k, c)| c * x[*k]).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.constraints {
            if let Some(k) = c.expr.as_affine().max_index() {
                if k >= self.n_scalars {
                    return Err(ConicError::UndeclaredVariable {
                        constraint: c.name.clone(),
                        index: k,
                    });
                }
            }
        }
        if let Some((&k, _)) = self.objective.iter().next_back() {
            if k >= self.n_scalars {
                return Err(ConicError::UndeclaredVariable {
                    constraint: "objective".into(),
                    index: k,
                });
            }
        }
        for v in &self.vars {
            if let (VarKind::Matrix(..), r) = (v.kind, v.restriction) {
                if r != Restriction::Free {
                    return Err(ConicError::InvalidOption(format!(
                        "rectangular variable `{}` cannot carry a restriction",
                        v.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Explicit constraints plus one constraint per restricted variable.
    pub fn all_constraints(&self) -> Vec<Constraint> {
        let mut out = self.constraints.clone();
        for v in &self.vars {
            let margin = match v.restriction {
                Restriction::Free => continue,
                Restriction::AtLeast(m) | Restriction::PsdMargin(m) => m,
            };
            let expr = match v.kind {
                VarKind::Scalar => ScalarVar(v.offset)
                    .expr()
                    .add_constant(&DMatrix::from_element(1, 1, -margin)),
                VarKind::Symmetric(n) => {
                    let mv = MatrixVar {
                        offset: v.offset,
                        rows: n,
                        cols: n,
                        symmetric: true,
                    };
                    mv.expr().add_constant(&(DMatrix::identity(n, n) * -margin))
                }
                VarKind::Matrix(..) => continue,
            };
            out.push(Constraint {
                name: format!("{}:restriction", v.name),
                expr: SymMatrixExpr::from_affine(&expr),
                sense: Sense::Psd,
            });
        }
        out
    }

    /// Largest violation over all constraints and restrictions, measured by
    /// eigenvalues of the evaluated matrices. Zero when feasible.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.all_constraints()
            .iter()
            .map(|c| {
                let eig = sorted_eigenvalues(&c.expr.eval(x));
                match c.sense {
                    Sense::Nsd => eig.last().copied().unwrap_or(0.0),
                    Sense::Psd => -eig.first().copied().unwrap_or(0.0),
                }
            })
            .fold(0.0, f64::max)
    }

    /// Plain-text sparse dump.
    ///
    /// ```text
    /// var <name> <kind> <offset> <len> <restriction>
    /// obj <index> <coeff>
    /// con <name> <nsd|psd> <dim>
    /// <var index|c> <row> <col> <value>
    /// end
    /// ```
    ///
    /// Only the upper triangle (`row ≤ col`) of each symmetric matrix is listed;
    /// `c` marks the constant term. Indices are zero-based.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for v in &self.vars {
            let kind = match v.kind {
                VarKind::Scalar => "scalar".to_string(),
                VarKind::Symmetric(n) => format!("sym{n}"),
                VarKind::Matrix(r, c) => format!("mat{r}x{c}"),
            };
            let restr = match v.restriction {
                Restriction::Free => "free".to_string(),
                Restriction::AtLeast(m) => format!("ge:{m:e}"),
                Restriction::PsdMargin(m) => format!("psd:{m:e}"),
            };
            let _ = writeln!(s, "var {} {} {} {} {}", v.name, kind, v.offset, v.len, restr);
        }
        for (k, c) in &self.objective {
            let _ = writeln!(s, "obj {k} {c:e}");
        }
        for c in &self.constraints {
            let sense = match c.sense {
                Sense::Nsd => "nsd",
                Sense::Psd => "psd",
            };
            let _ = writeln!(s, "con {} {} {}", c.name, sense, c.expr.dim());
            let mut emit = |tag: String, m: &DMatrix<f64>| {
                for j in 0..m.ncols() {
                    for i in 0..=j {
                        if m[(i, j)] != 0.0 {
                            let _ = writeln!(s, "{tag} {i} {j} {:e}", m[(i, j)]);
                        }
                    }
                }
            };
            emit("c".into(), c.expr.constant_part());
            for (k, m) in c.expr.terms() {
                emit(k.to_string(), m);
            }
            let _ = writeln!(s, "end");
        }
        s
    }
}
