//! Affine matrix expressions over the scalar decision variables of a problem.
//!
//! An [`AffineMatrix`] is `C + Σ_k x_k F_k` where `x_k` are scalar variable
//! indices. Shapes are checked with panics: a mismatch is a bug in the
//! caller's assembly code, not a data error.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrix {
    constant: DMatrix<f64>,
    terms: BTreeMap<usize, DMatrix<f64>>,
}

impl AffineMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(DMatrix::zeros(rows, cols))
    }

    pub fn constant(m: DMatrix<f64>) -> Self {
        Self {
            constant: m,
            terms: BTreeMap::new(),
        }
    }

    /// `coeff · x_index`.
    pub fn term(index: usize, coeff: DMatrix<f64>) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(index, coeff);
        Self {
            constant: DMatrix::zeros(terms[&index].nrows(), terms[&index].ncols()),
            terms,
        }
    }

    pub fn nrows(&self) -> usize {
        self.constant.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.constant.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.constant.shape()
    }

    pub fn constant_part(&self) -> &DMatrix<f64> {
        &self.constant
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, &DMatrix<f64>)> {
        self.terms.iter().map(|(k, m)| (*k, m))
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest variable index referenced, if any.
    pub fn max_index(&self) -> Option<usize> {
        self.terms.keys().next_back().copied()
    }

    fn map(&self, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> Self {
        Self {
            constant: f(&self.constant),
            terms: self.terms.iter().map(|(k, m)| (*k, f(m))).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        self.map(|m| m.transpose())
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|m| m * s)
    }

    /// `L · self`.
    pub fn mul_left(&self, l: &DMatrix<f64>) -> Self {
        assert_eq!(l.ncols(), self.nrows(), "mul_left shape mismatch");
        self.map(|m| l * m)
    }

    /// `self · R`.
    pub fn mul_right(&self, r: &DMatrix<f64>) -> Self {
        assert_eq!(self.ncols(), r.nrows(), "mul_right shape mismatch");
        self.map(|m| m * r)
    }

    /// `self + selfᵀ`.
    pub fn sym(&self) -> Self {
        assert_eq!(self.nrows(), self.ncols(), "sym of a non-square expression");
        self + &self.transpose()
    }

    /// Product of a 1×1 expression with a constant matrix.
    pub fn scalar_times(&self, m: &DMatrix<f64>) -> Self {
        assert_eq!(self.shape(), (1, 1), "scalar_times needs a 1x1 expression");
        self.map(|c| m * c[(0, 0)])
    }

    pub fn add_constant(&self, m: &DMatrix<f64>) -> Self {
        assert_eq!(self.shape(), m.shape(), "add_constant shape mismatch");
        let mut out = self.clone();
        out.constant += m;
        out
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (k, m) in &self.terms {
            out += m * x[*k];
        }
        out
    }

    /// Extract the sub-matrix starting at `(r, c)` with the given shape.
    pub fn slice(&self, r: usize, c: usize, rows: usize, cols: usize) -> Self {
        self.map(|m| m.view((r, c), (rows, cols)).into_owned())
    }

    fn drop_zero_terms(mut self) -> Self {
        self.terms.retain(|_, m| m.iter().any(|v| *v != 0.0));
        self
    }
}

impl Add for &AffineMatrix {
    type Output = AffineMatrix;
    fn add(self, rhs: &AffineMatrix) -> AffineMatrix {
        assert_eq!(self.shape(), rhs.shape(), "add shape mismatch");
        let mut out = self.clone();
        out.constant += &rhs.constant;
        for (k, m) in &rhs.terms {
            out.terms
                .entry(*k)
                .and_modify(|e| *e += m)
                .or_insert_with(|| m.clone());
        }
        out.drop_zero_terms()
    }
}

impl Add for AffineMatrix {
    type Output = AffineMatrix;
    fn add(self, rhs: AffineMatrix) -> AffineMatrix {
        &self + &rhs
    }
}

impl Neg for &AffineMatrix {
    type Output = AffineMatrix;
    fn neg(self) -> AffineMatrix {
        self.scale(-1.0)
    }
}

impl Neg for AffineMatrix {
    type Output = AffineMatrix;
    fn neg(self) -> AffineMatrix {
        self.scale(-1.0)
    }
}

impl Sub for &AffineMatrix {
    type Output = AffineMatrix;
    fn sub(self, rhs: &AffineMatrix) -> AffineMatrix {
        self + &(-rhs)
    }
}

impl Sub for AffineMatrix {
    type Output = AffineMatrix;
    fn sub(self, rhs: AffineMatrix) -> AffineMatrix {
        &self - &rhs
    }
}

impl Mul<&AffineMatrix> for &DMatrix<f64> {
    type Output = AffineMatrix;
    fn mul(self, rhs: &AffineMatrix) -> AffineMatrix {
        rhs.mul_left(self)
    }
}

impl Mul<&DMatrix<f64>> for &AffineMatrix {
    type Output = AffineMatrix;
    fn mul(self, rhs: &DMatrix<f64>) -> AffineMatrix {
        self.mul_right(rhs)
    }
}

/// A square affine expression whose constant and coefficients are all
/// exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrixExpr(AffineMatrix);

impl SymMatrixExpr {
    /// Symmetrise `a` as `(a + aᵀ)/2`.
    pub fn from_affine(a: &AffineMatrix) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "symmetric expression must be square");
        SymMatrixExpr(a.map(|m| (m + m.transpose()) * 0.5).drop_zero_terms())
    }

    pub fn constant(m: DMatrix<f64>) -> Self {
        Self::from_affine(&AffineMatrix::constant(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_affine(&self) -> &AffineMatrix {
        &self.0
    }

    pub fn constant_part(&self) -> &DMatrix<f64> {
        &self.0.constant
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, &DMatrix<f64>)> {
        self.0.terms()
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        self.0.eval(x)
    }
}

/// Builder for a symmetric block matrix from its lower-triangular blocks.
///
/// Unset blocks are zero. Setting `(i, j)` with `i > j` also fills the
/// transposed `(j, i)` block.
#[derive(Debug, Clone)]
pub struct BlockSym {
    sizes: Vec<usize>,
    blocks: BTreeMap<(usize, usize), AffineMatrix>,
}

impl BlockSym {
    pub fn new(sizes: Vec<usize>) -> Self {
        Self {
            sizes,
            blocks: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn set(&mut self, i: usize, j: usize, block: AffineMatrix) -> &mut Self {
        assert!(i >= j, "only lower-triangular blocks are stored");
        assert_eq!(
            block.shape(),
            (self.sizes[i], self.sizes[j]),
            "block ({i},{j}) has the wrong shape"
        );
        self.blocks.insert((i, j), block);
        self
    }

    pub fn build(&self) -> SymMatrixExpr {
        let n = self.dim();
        let offsets: Vec<usize> = self
            .sizes
            .iter()
            .scan(0, |acc, s| {
                let o = *acc;
                *acc += s;
                Some(o)
            })
            .collect();
        let mut out = AffineMatrix::zeros(n, n);
        for (&(i, j), b) in &self.blocks {
            let place = |m: &DMatrix<f64>| {
                let mut full = DMatrix::zeros(n, n);
                full.view_mut((offsets[i], offsets[j]), m.shape())
                    .copy_from(m);
                if i != j {
                    full.view_mut((offsets[j], offsets[i]), (m.ncols(), m.nrows()))
                        .copy_from(&m.transpose());
                }
                full
            };
            out = &out + &b.map(place);
        }
        // Diagonal blocks enter once, so symmetrising keeps their values.
        SymMatrixExpr::from_affine(&out)
    }
}
