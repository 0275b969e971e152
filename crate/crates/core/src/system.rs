//! Problem instances, the `B`-weighted geometry, and the small pseudoinverse
//! factorization shared by every sketch.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{norm_sq, Matrix};

/// Largest dimension for which an explicit SPD matrix has its spectrum checked on construction.
pub const SPD_CHECK_LIMIT: usize = 2000;

/// Symmetric positive definite `B`, stored with its Cholesky factor.
#[derive(Clone, Debug)]
pub struct SpdMatrix {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl SpdMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::invalid("inner-product matrix must be square"));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("inner-product matrix has non-finite entries"));
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::invalid(format!(
                "inner-product matrix is not symmetric (max deviation {asym:e})"
            )));
        }
        if matrix.nrows() <= SPD_CHECK_LIMIT {
            let eig = SymmetricEigen::new(matrix.clone());
            if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
                return Err(Error::invalid("inner-product matrix is not positive definite"));
            }
        }
        let chol = Cholesky::new(matrix.clone())
            .ok_or_else(|| Error::invalid("inner-product matrix is not positive definite"))?;
        Ok(Self { matrix, chol })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Lower-triangular `L` with `B = L L^T`.
    pub fn cholesky_l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// `B^{-1} v`
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        let rhs = nalgebra::DVector::from_column_slice(v);
        self.chol.solve(&rhs).as_slice().to_vec()
    }

    pub fn solve_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(m)
    }

    pub fn quadratic(&self, v: &[f64]) -> f64 {
        let x = nalgebra::DVector::from_column_slice(v);
        x.dot(&(&self.matrix * &x))
    }
}

/// The inner product `<v, B v>` that defines the projection geometry.
#[derive(Clone, Debug)]
pub enum InnerProduct {
    Identity,
    /// `B = A^T A`, never formed. Only meaningful with column-of-`A` sketches.
    GramOfA,
    ExplicitSpd(SpdMatrix),
}

impl InnerProduct {
    pub fn name(&self) -> &'static str {
        match self {
            InnerProduct::Identity => "identity",
            InnerProduct::GramOfA => "gram-of-a",
            InnerProduct::ExplicitSpd(_) => "explicit-spd",
        }
    }
}

/// `||v||_B^2`. For `GramOfA` this is `||A v||^2`, computed without `A^T A`.
pub fn b_norm_sq(v: &[f64], inner: &InnerProduct, a: &Matrix) -> Result<f64> {
    if v.len() != a.cols() {
        return Err(Error::invalid(format!(
            "vector has length {}, expected {}",
            v.len(),
            a.cols()
        )));
    }
    Ok(match inner {
        InnerProduct::Identity => norm_sq(v),
        InnerProduct::GramOfA => norm_sq(&a.matvec(v)),
        InnerProduct::ExplicitSpd(b) => {
            if b.dim() != v.len() {
                return Err(Error::invalid("inner-product dimension mismatch"));
            }
            b.quadratic(v).max(0.0)
        }
    })
}

/// A consistent linear system `A x = b` together with its projection geometry.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    a: Arc<Matrix>,
    b: Vec<f64>,
    inner: InnerProduct,
    x_star: Option<Vec<f64>>,
}

impl LinearSystem {
    pub fn new(a: impl Into<Arc<Matrix>>, b: Vec<f64>, inner: InnerProduct, x_star: Option<Vec<f64>>) -> Result<Self> {
        let a = a.into();
        if !a.is_finite() {
            return Err(Error::invalid("matrix has NaN or infinite entries"));
        }
        if b.len() != a.rows() {
            return Err(Error::invalid(format!(
                "right-hand side has length {}, matrix has {} rows",
                b.len(),
                a.rows()
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("right-hand side has non-finite entries"));
        }
        if let InnerProduct::ExplicitSpd(spd) = &inner {
            if spd.dim() != a.cols() {
                return Err(Error::invalid(format!(
                    "inner-product matrix is {0}x{0}, system has {1} columns",
                    spd.dim(),
                    a.cols()
                )));
            }
        }
        if let Some(xs) = &x_star {
            if xs.len() != a.cols() {
                return Err(Error::invalid("known solution has the wrong length"));
            }
            let mut r = a.matvec(xs);
            for (ri, bi) in r.iter_mut().zip(&b) {
                *ri -= bi;
            }
            let bn = norm_sq(&b).sqrt();
            if norm_sq(&r).sqrt() > 1e-8 * (1.0 + bn) {
                return Err(Error::invalid("known solution does not satisfy A x = b"));
            }
        }
        Ok(Self { a, b, inner, x_star })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn a_shared(&self) -> Arc<Matrix> {
        Arc::clone(&self.a)
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn inner(&self) -> &InnerProduct {
        &self.inner
    }

    pub fn x_star(&self) -> Option<&[f64]> {
        self.x_star.as_deref()
    }

    pub fn rows(&self) -> usize {
        self.a.rows()
    }

    pub fn cols(&self) -> usize {
        self.a.cols()
    }

    pub fn b_norm_sq(&self, v: &[f64]) -> Result<f64> {
        b_norm_sq(v, &self.inner, &self.a)
    }

    /// `||x - x*||_B^2`, or `None` when no solution is known.
    pub fn error_b_sq(&self, x: &[f64]) -> Option<f64> {
        let xs = self.x_star.as_ref()?;
        let diff: Vec<f64> = x.iter().zip(xs).map(|(a, b)| a - b).collect();
        self.b_norm_sq(&diff).ok()
    }

    /// Scale-aware threshold below which sketched losses count as zero.
    pub fn loss_tolerance(&self) -> f64 {
        1e-14 * (1.0 + norm_sq(&self.b))
    }
}

/// Square factor `C` with `C C^T = G^+`.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdFactor {
    pub c: DMatrix<f64>,
    pub rank: usize,
}

impl PsdFactor {
    pub fn size(&self) -> usize {
        self.c.nrows()
    }

    /// `C C^T`
    pub fn pinv(&self) -> DMatrix<f64> {
        &self.c * self.c.transpose()
    }
}

/// Default relative truncation tolerance for a `tau x tau` Gram matrix.
pub fn default_pinv_tol(tau: usize) -> f64 {
    tau as f64 * 2.2e-16
}

/// Factors the pseudoinverse of a symmetric PSD matrix.
///
/// Eigenvalues at or below `rel_tol * lambda_max` are treated as zero.
pub fn pinv_factor(g: &DMatrix<f64>, rel_tol: f64) -> Result<PsdFactor> {
    let tau = g.nrows();
    if tau == 0 || !g.is_square() {
        return Err(Error::invalid("pseudoinverse factor needs a non-empty square matrix"));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("Gram matrix has non-finite entries"));
    }
    let scale = g.amax();
    if scale == 0.0 {
        return Ok(PsdFactor {
            c: DMatrix::zeros(tau, tau),
            rank: 0,
        });
    }
    let asym = (g - g.transpose()).amax();
    if asym > 1e-10 * scale {
        return Err(Error::invalid(format!(
            "Gram matrix is not symmetric (max deviation {asym:e})"
        )));
    }
    if tau == 1 {
        let l = g[(0, 0)];
        if l < 0.0 {
            return Err(Error::invalid("Gram matrix has a negative eigenvalue"));
        }
        return Ok(PsdFactor {
            c: DMatrix::from_element(1, 1, 1.0 / l.sqrt()),
            rank: 1,
        });
    }
    let sym = (g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let lmax = eig.eigenvalues.max();
    let cutoff = rel_tol * lmax.max(0.0);
    if eig.eigenvalues.min() < -rel_tol.max(1e-12) * scale.max(lmax) {
        return Err(Error::invalid("Gram matrix has a negative eigenvalue"));
    }
    let mut c = DMatrix::zeros(tau, tau);
    let mut rank = 0;
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        if l > cutoff && l > 0.0 {
            rank += 1;
            let s = 1.0 / l.sqrt();
            for i in 0..tau {
                c[(i, j)] = eig.eigenvectors[(i, j)] * s;
            }
        }
    }
    Ok(PsdFactor { c, rank })
}

/// Factor of `(W^T W)^+` for which `W C` has orthonormal nonzero columns to
/// working precision, even when `W` is badly conditioned.
///
/// Rank is read off a column-pivoted QR of `W`, comparing squared diagonal
/// entries of `R` against `rel_tol` times the leading one.
pub fn pinv_factor_of_columns(w: &DMatrix<f64>, rel_tol: f64) -> Result<PsdFactor> {
    if w.ncols() == 0 || w.nrows() == 0 {
        return Err(Error::invalid("pseudoinverse factor needs a non-empty matrix"));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("sketched matrix has non-finite entries"));
    }
    let tau = w.ncols();
    let qr = w.clone().col_piv_qr();
    let r = qr.r();
    let d = r.nrows().min(tau);
    let lead = r[(0, 0)] * r[(0, 0)];
    let rank = (0..d)
        .take_while(|&j| lead > 0.0 && r[(j, j)] * r[(j, j)] > rel_tol * lead)
        .count();
    let mut c = DMatrix::zeros(tau, tau);
    if rank == 0 {
        return Ok(PsdFactor { c, rank });
    }
    // Q_k^T W = R_2^T Q_2^T, so W Q_2 R_2^{-T} = Q_k
    let m = qr.q().columns(0, rank).transpose() * w;
    let qr2 = m.transpose().qr();
    let Some(inv) = qr2
        .r()
        .transpose()
        .solve_lower_triangular(&DMatrix::identity(rank, rank))
    else {
        return Err(Error::invalid("sketched matrix is numerically singular"));
    };
    c.columns_mut(0, rank).copy_from(&(qr2.q() * inv));
    Ok(PsdFactor { c, rank })
}
