//! Sketch families and the one-time precomputation behind the efficient iteration.
//!
//! For each sketch `S_i` we form a factor `C_i` with `C_i C_i^T = (S_i^T A B^{-1} A^T S_i)^+`,
//! the update direction `U_i = B^{-1} A^T S_i C_i`, and the interaction blocks
//! `G_ij = C_i^T S_i^T A B^{-1} A^T S_j C_j` that drive the auxiliary residual update
//! `R_i <- R_i - G_{i,j} R_j` after a step along sketch `j`.

use std::collections::HashSet;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{axpy, Matrix};
use crate::system::{default_pinv_tol, pinv_factor, pinv_factor_of_columns, InnerProduct, LinearSystem, PsdFactor};

/// The finite set of sketching matrices `S_1, ..., S_q`.
#[derive(Clone, Debug)]
pub enum SketchSet {
    /// `S_i = e_i`: randomized Kaczmarz (`q = m`, `tau = 1`).
    RowIdentity,
    /// `S_i = A e_i`: coordinate descent (`q = n`, `tau = 1`); needs `B = A^T A`.
    ColumnOfA,
    /// Disjoint row blocks, all of the same size `tau`.
    RowBlocks(Vec<Vec<usize>>),
    /// Arbitrary dense `m x tau` sketches.
    CustomDense(Vec<DMatrix<f64>>),
}

impl SketchSet {
    /// Consecutive blocks of `tau` rows. `rows` must be divisible by `tau`.
    pub fn consecutive_blocks(rows: usize, tau: usize) -> Result<Self> {
        if tau == 0 {
            return Err(Error::invalid("block size must be at least 1"));
        }
        if !rows.is_multiple_of(tau) {
            return Err(Error::invalid(format!(
                "{rows} rows cannot be partitioned into blocks of {tau}"
            )));
        }
        Ok(SketchSet::RowBlocks(
            (0..rows / tau)
                .map(|b| (b * tau..(b + 1) * tau).collect())
                .collect(),
        ))
    }

    fn validate(&self, system: &LinearSystem) -> Result<()> {
        let gram_inner = matches!(system.inner(), InnerProduct::GramOfA);
        match self {
            SketchSet::ColumnOfA if !gram_inner => {
                Err(Error::invalid("column-of-A sketches require B = A^T A"))
            }
            SketchSet::ColumnOfA => Ok(()),
            _ if gram_inner => Err(Error::invalid(
                "B = A^T A is only supported with column-of-A sketches",
            )),
            SketchSet::RowIdentity => Ok(()),
            SketchSet::RowBlocks(blocks) => {
                let tau = blocks.first().map_or(0, Vec::len);
                if blocks.is_empty() || tau == 0 {
                    return Err(Error::invalid("row blocks must be non-empty"));
                }
                let mut seen = HashSet::new();
                for block in blocks {
                    if block.len() != tau {
                        return Err(Error::invalid("every row block must have the same size"));
                    }
                    for &r in block {
                        if r >= system.rows() {
                            return Err(Error::invalid(format!("row index {r} out of range")));
                        }
                        if !seen.insert(r) {
                            return Err(Error::invalid(format!("row {r} appears in two blocks")));
                        }
                    }
                }
                Ok(())
            }
            SketchSet::CustomDense(sketches) => {
                let tau = sketches.first().map_or(0, |s| s.ncols());
                if sketches.is_empty() || tau == 0 {
                    return Err(Error::invalid("custom sketches must be non-empty"));
                }
                if sketches
                    .iter()
                    .any(|s| s.nrows() != system.rows() || s.ncols() != tau)
                {
                    return Err(Error::invalid(format!(
                        "every custom sketch must be {}x{tau}",
                        system.rows()
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Which cost table applies to a sketch family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SketchFamily {
    Kaczmarz,
    CoordinateDescent,
    General,
}

/// How the update direction `U_i` is stored.
#[derive(Clone, Debug)]
enum Directions {
    /// `U_i = C_i A[i, :]^T`
    ScaledRows(Vec<f64>),
    /// `U_i = C_i e_i`
    ScaledCoordinates(Vec<f64>),
    /// Columns `i*tau .. (i+1)*tau` hold `U_i`.
    Dense(DMatrix<f64>),
}

/// How `C_i^T S_i^T r` is evaluated for a residual vector `r`.
#[derive(Clone, Debug)]
enum SketchMap {
    ScaledRows(Vec<f64>),
    /// Uses the stored transpose of `A`.
    ScaledColumns(Vec<f64>),
    Blocks(Vec<Vec<usize>>),
    Custom(Vec<DMatrix<f64>>),
}

/// The `q x q` grid of `tau x tau` interaction blocks.
#[derive(Clone, Debug)]
pub enum GramBlocks {
    /// Full `q*tau x q*tau` matrix, column-major.
    Dense(DMatrix<f64>),
    /// Scalar blocks (`tau = 1`) in compressed sparse column form; symmetric.
    Sparse {
        colptr: Vec<usize>,
        rows: Vec<usize>,
        values: Vec<f64>,
    },
}

impl GramBlocks {
    /// Stored scalars.
    pub fn stored_entries(&self) -> usize {
        match self {
            GramBlocks::Dense(g) => g.len(),
            GramBlocks::Sparse { values, .. } => values.len(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, GramBlocks::Sparse { .. })
    }

    /// `res -= G[:, block j] * r_j`
    #[inline]
    fn subtract_column(&self, j: usize, tau: usize, rj: &[f64], res: &mut [f64]) {
        match self {
            GramBlocks::Dense(g) => {
                let n = g.nrows();
                let data = g.as_slice();
                for (t, &coef) in rj.iter().enumerate() {
                    if coef != 0.0 {
                        let col = &data[(j * tau + t) * n..(j * tau + t + 1) * n];
                        axpy(-coef, col, res);
                    }
                }
            }
            GramBlocks::Sparse {
                colptr,
                rows,
                values,
            } => {
                let coef = rj[0];
                for k in colptr[j]..colptr[j + 1] {
                    res[rows[k]] -= values[k] * coef;
                }
            }
        }
    }

    fn block(&self, i: usize, j: usize, tau: usize) -> DMatrix<f64> {
        match self {
            GramBlocks::Dense(g) => g.view((i * tau, j * tau), (tau, tau)).into_owned(),
            GramBlocks::Sparse {
                colptr,
                rows,
                values,
            } => {
                let v = (colptr[j]..colptr[j + 1])
                    .find(|&k| rows[k] == i)
                    .map_or(0.0, |k| values[k]);
                DMatrix::from_element(1, 1, v)
            }
        }
    }

    /// Dense copy of the whole grid.
    pub fn to_dense(&self, dim: usize) -> DMatrix<f64> {
        match self {
            GramBlocks::Dense(g) => g.clone(),
            GramBlocks::Sparse {
                colptr,
                rows,
                values,
            } => {
                let mut g = DMatrix::zeros(dim, dim);
                for j in 0..dim {
                    for k in colptr[j]..colptr[j + 1] {
                        g[(rows[k], j)] = values[k];
                    }
                }
                g
            }
        }
    }
}

#[derive(Debug)]
struct Shared {
    family: SketchFamily,
    q: usize,
    tau: usize,
    a: Arc<Matrix>,
    /// `A^T`, kept for column access by coordinate descent.
    at: Option<Matrix>,
    factors: Vec<PsdFactor>,
    weights: Vec<f64>,
    directions: Directions,
    map: SketchMap,
    gram: GramBlocks,
    /// `C_i^T S_i^T A`, stacked as `q*tau x n`; only for custom sketches.
    direct_rows: Option<DMatrix<f64>>,
}

/// Everything the efficient iteration precomputes for one system and sketch set.
///
/// The heavy, right-hand-side independent parts are shared behind an `Arc`, so
/// [`PrecomputedOperators::with_rhs`] is cheap and safe to call once per trial.
#[derive(Clone, Debug)]
pub struct PrecomputedOperators {
    shared: Arc<Shared>,
    b: Vec<f64>,
    /// `d_i = C_i^T S_i^T b`, stacked.
    rhs: Vec<f64>,
}

/// Builds factors, directions, interaction blocks, and residual operators.
pub fn precompute(system: &LinearSystem, sketches: &SketchSet) -> Result<PrecomputedOperators> {
    sketches.validate(system)?;
    let a = system.a_shared();
    let shared = match (sketches, system.inner()) {
        (SketchSet::RowIdentity, InnerProduct::Identity) => scalar_family(a, SketchFamily::Kaczmarz),
        (SketchSet::ColumnOfA, InnerProduct::GramOfA) => {
            scalar_family(a, SketchFamily::CoordinateDescent)
        }
        (SketchSet::RowIdentity, InnerProduct::ExplicitSpd(_)) => {
            let blocks = (0..a.rows()).map(|i| vec![i]).collect();
            general_family(system, SketchMap::Blocks(blocks), SketchFamily::Kaczmarz)?
        }
        (SketchSet::RowBlocks(blocks), _) => {
            general_family(system, SketchMap::Blocks(blocks.clone()), SketchFamily::General)?
        }
        (SketchSet::CustomDense(s), _) => {
            general_family(system, SketchMap::Custom(s.clone()), SketchFamily::General)?
        }
        _ => unreachable!("pairing checked by validate"),
    };
    let shared = Arc::new(shared);
    let mut rhs = vec![0.0; shared.q * shared.tau];
    apply_map(&shared, system.b(), &mut rhs);
    Ok(PrecomputedOperators {
        shared,
        b: system.b().to_vec(),
        rhs,
    })
}

/// Kaczmarz (`rows_are_sketches`) or coordinate descent with `tau = 1`.
fn scalar_family(a: Arc<Matrix>, family: SketchFamily) -> Shared {
    let at = a.transpose();
    // rows of `vecs` are the vectors A^T S_i (up to the B^{-1} weighting, which is trivial here)
    let vecs: &Matrix = if family == SketchFamily::Kaczmarz { &a } else { &at };
    let q = vecs.rows();
    let weights: Vec<f64> = (0..q).map(|i| vecs.row_norm_sq(i)).collect();
    let scale: Vec<f64> = weights
        .iter()
        .map(|&w| if w > 0.0 { 1.0 / w.sqrt() } else { 0.0 })
        .collect();
    let factors = weights
        .iter()
        .zip(&scale)
        .map(|(&w, &s)| PsdFactor {
            c: DMatrix::from_element(1, 1, s),
            rank: usize::from(w > 0.0),
        })
        .collect();
    let vecs_t: &Matrix = if family == SketchFamily::Kaczmarz { &at } else { &a };
    let gram = normalized_gram(vecs, vecs_t, &scale);
    let (directions, map) = if family == SketchFamily::Kaczmarz {
        (Directions::ScaledRows(scale.clone()), SketchMap::ScaledRows(scale))
    } else {
        (
            Directions::ScaledCoordinates(scale.clone()),
            SketchMap::ScaledColumns(scale),
        )
    };
    let at = (family == SketchFamily::CoordinateDescent).then_some(at);
    Shared {
        family,
        q,
        tau: 1,
        a,
        at,
        factors,
        weights,
        directions,
        map,
        gram,
        direct_rows: None,
    }
}

/// `G_ij = s_i s_j <v_i, v_j>` for the rows `v_i` of `vecs`; `vecs_t` is its transpose.
fn normalized_gram(vecs: &Matrix, vecs_t: &Matrix, scale: &[f64]) -> GramBlocks {
    let q = vecs.rows();
    match vecs {
        Matrix::Dense(d) => {
            let mut nm = d.to_nalgebra();
            for (i, &s) in scale.iter().enumerate() {
                nm.row_mut(i).scale_mut(s);
            }
            GramBlocks::Dense(&nm * nm.transpose())
        }
        Matrix::Sparse(s) => {
            let Matrix::Sparse(st) = vecs_t else {
                unreachable!("transpose shares the storage kind")
            };
            let columns: Vec<Vec<(usize, f64)>> = (0..q)
                .into_par_iter()
                .map(|i| {
                    let mut acc: std::collections::BTreeMap<usize, f64> = Default::default();
                    let (idx, val) = s.row(i);
                    for (&k, &aik) in idx.iter().zip(val) {
                        let (jdx, jval) = st.row(k);
                        for (&j, &ajk) in jdx.iter().zip(jval) {
                            *acc.entry(j).or_insert(0.0) += aik * ajk;
                        }
                    }
                    acc.into_iter()
                        .map(|(j, v)| (j, v * scale[i] * scale[j]))
                        .filter(|&(_, v)| v != 0.0)
                        .collect()
                })
                .collect();
            let nnz: usize = columns.iter().map(Vec::len).sum();
            if (nnz as f64) < 0.25 * (q as f64) * (q as f64) {
                let mut colptr = Vec::with_capacity(q + 1);
                let mut rows = Vec::with_capacity(nnz);
                let mut values = Vec::with_capacity(nnz);
                colptr.push(0);
                for col in columns {
                    for (r, v) in col {
                        rows.push(r);
                        values.push(v);
                    }
                    colptr.push(rows.len());
                }
                GramBlocks::Sparse {
                    colptr,
                    rows,
                    values,
                }
            } else {
                let mut g = DMatrix::zeros(q, q);
                for (j, col) in columns.into_iter().enumerate() {
                    for (r, v) in col {
                        g[(r, j)] = v;
                    }
                }
                GramBlocks::Dense(g)
            }
        }
    }
}

/// Dense path for block, custom, and `B != I` sketches.
fn general_family(system: &LinearSystem, map: SketchMap, family: SketchFamily) -> Result<Shared> {
    let a = system.a_shared();
    let n = a.cols();
    // A^T S_i, one n x tau matrix per sketch
    let ats: Vec<DMatrix<f64>> = match &map {
        SketchMap::Blocks(blocks) => blocks
            .iter()
            .map(|block| {
                let mut w = DMatrix::zeros(n, block.len());
                for (t, &r) in block.iter().enumerate() {
                    let row = a.row_dense(r);
                    w.column_mut(t).copy_from_slice(&row);
                }
                w
            })
            .collect(),
        SketchMap::Custom(sketches) => {
            let at = a.to_nalgebra().transpose();
            sketches.iter().map(|s| &at * s).collect()
        }
        _ => unreachable!("scalar families use scalar_family"),
    };
    let q = ats.len();
    let tau = ats[0].ncols();
    let inner = system.inner();
    let solve = |w: &DMatrix<f64>| -> DMatrix<f64> {
        match inner {
            InnerProduct::ExplicitSpd(b) => b.solve_matrix(w),
            _ => w.clone(),
        }
    };
    let chol_l = match inner {
        InnerProduct::ExplicitSpd(b) => Some(b.cholesky_l()),
        _ => None,
    };
    let per_sketch: Vec<(PsdFactor, f64, DMatrix<f64>, DMatrix<f64>)> = ats
        .par_iter()
        .map(|w| {
            let v = solve(w);
            let (factor, weight) = match (inner, &chol_l) {
                (InnerProduct::Identity, _) => (pinv_factor_of_columns(w, default_pinv_tol(tau))?, w.norm_squared()),
                (InnerProduct::ExplicitSpd(_), Some(l)) => {
                    // W^T B^{-1} W = Y^T Y with Y = L^{-1} W
                    let y = l
                        .solve_lower_triangular(w)
                        .ok_or_else(|| Error::invalid("singular Cholesky factor"))?;
                    (pinv_factor_of_columns(&y, default_pinv_tol(tau))?, y.norm_squared())
                }
                _ => {
                    let m = w.transpose() * &v;
                    let m = (&m + m.transpose()) * 0.5;
                    let weight = m.trace();
                    (pinv_factor(&m, default_pinv_tol(tau))?, weight)
                }
            };
            let wc = w * &factor.c;
            let u = v * &factor.c;
            Ok((factor, weight, wc, u))
        })
        .collect::<Result<_>>()?;
    let mut w_all = DMatrix::zeros(n, q * tau);
    let mut u_all = DMatrix::zeros(n, q * tau);
    let mut factors = Vec::with_capacity(q);
    let mut weights = Vec::with_capacity(q);
    for (i, (factor, weight, wc, u)) in per_sketch.into_iter().enumerate() {
        w_all.columns_mut(i * tau, tau).copy_from(&wc);
        u_all.columns_mut(i * tau, tau).copy_from(&u);
        factors.push(factor);
        weights.push(weight);
    }
    let gram = w_all.transpose() * &u_all;
    let gram = (&gram + gram.transpose()) * 0.5;
    let direct_rows = matches!(map, SketchMap::Custom(_)).then(|| w_all.transpose());
    let map = match map {
        SketchMap::Custom(s) => SketchMap::Custom(
            s.into_iter()
                .zip(&factors)
                .map(|(s, f)| s * &f.c)
                .collect(),
        ),
        other => other,
    };
    Ok(Shared {
        family,
        q,
        tau,
        a,
        at: None,
        factors,
        weights,
        directions: Directions::Dense(u_all),
        map,
        gram: GramBlocks::Dense(gram),
        direct_rows,
    })
}

/// `out_i = C_i^T S_i^T r` for every sketch.
fn apply_map(shared: &Shared, r: &[f64], out: &mut [f64]) {
    let tau = shared.tau;
    match &shared.map {
        SketchMap::ScaledRows(scale) => {
            for ((o, &ri), &s) in out.iter_mut().zip(r).zip(scale) {
                *o = s * ri;
            }
        }
        SketchMap::ScaledColumns(scale) => {
            let at = shared.at.as_ref().expect("coordinate descent keeps A^T");
            for (i, o) in out.iter_mut().enumerate() {
                *o = scale[i] * at.row_dot(i, r);
            }
        }
        SketchMap::Blocks(blocks) => {
            for (i, block) in blocks.iter().enumerate() {
                let c = &shared.factors[i].c;
                for t in 0..tau {
                    out[i * tau + t] = block.iter().enumerate().map(|(s, &row)| c[(s, t)] * r[row]).sum();
                }
            }
        }
        SketchMap::Custom(sc) => {
            let rv = nalgebra::DVector::from_column_slice(r);
            for (i, s) in sc.iter().enumerate() {
                let v = s.tr_mul(&rv);
                out[i * tau..(i + 1) * tau].copy_from_slice(v.as_slice());
            }
        }
    }
}

impl PrecomputedOperators {
    /// Same operators with a new right-hand side (and hence new `d_i`).
    pub fn with_rhs(&self, b: &[f64]) -> Result<Self> {
        if b.len() != self.shared.a.rows() {
            return Err(Error::invalid("right-hand side length does not match A"));
        }
        let mut rhs = vec![0.0; self.dim()];
        apply_map(&self.shared, b, &mut rhs);
        Ok(Self {
            shared: Arc::clone(&self.shared),
            b: b.to_vec(),
            rhs,
        })
    }

    pub fn family(&self) -> SketchFamily {
        self.shared.family
    }

    /// Number of sketches `q`.
    pub fn q(&self) -> usize {
        self.shared.q
    }

    /// Sketch size `tau`.
    pub fn tau(&self) -> usize {
        self.shared.tau
    }

    /// Length of the stacked residual vector, `q * tau`.
    pub fn dim(&self) -> usize {
        self.shared.q * self.shared.tau
    }

    pub fn rows(&self) -> usize {
        self.shared.a.rows()
    }

    pub fn cols(&self) -> usize {
        self.shared.a.cols()
    }

    pub fn factor(&self, i: usize) -> &PsdFactor {
        &self.shared.factors[i]
    }

    /// `||A^T S_i||^2_{B^{-1}}`, the weights of the norm-proportional distribution.
    pub fn sketch_weights(&self) -> &[f64] {
        &self.shared.weights
    }

    pub fn gram(&self) -> &GramBlocks {
        &self.shared.gram
    }

    /// `G_ij` as a dense `tau x tau` matrix.
    pub fn gram_block(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.shared.gram.block(i, j, self.shared.tau)
    }

    /// `d = (C_i^T S_i^T b)_i`, stacked.
    pub fn rhs_projection(&self) -> &[f64] {
        &self.rhs
    }

    /// `U_i` as a dense `n x tau` matrix.
    pub fn direction(&self, i: usize) -> DMatrix<f64> {
        let n = self.cols();
        let tau = self.tau();
        match &self.shared.directions {
            Directions::ScaledRows(scale) => {
                let row = self.shared.a.row_dense(i);
                DMatrix::from_iterator(n, 1, row.into_iter().map(|v| v * scale[i]))
            }
            Directions::ScaledCoordinates(scale) => {
                let mut u = DMatrix::zeros(n, 1);
                u[(i, 0)] = scale[i];
                u
            }
            Directions::Dense(u) => u.columns(i * tau, tau).into_owned(),
        }
    }

    /// `x -= U_i r_i`. Returns the coordinate touched when the direction is a
    /// single coordinate, so callers can patch incremental state.
    pub(crate) fn apply_direction(&self, i: usize, ri: &[f64], x: &mut [f64]) -> Option<(usize, f64)> {
        match &self.shared.directions {
            Directions::ScaledRows(scale) => {
                self.shared.a.row_axpy(i, -scale[i] * ri[0], x);
                None
            }
            Directions::ScaledCoordinates(scale) => {
                let delta = -scale[i] * ri[0];
                x[i] += delta;
                Some((i, delta))
            }
            Directions::Dense(u) => {
                let tau = self.tau();
                let n = u.nrows();
                let data = u.as_slice();
                for (t, &coef) in ri.iter().enumerate() {
                    if coef != 0.0 {
                        let col = &data[(i * tau + t) * n..(i * tau + t + 1) * n];
                        axpy(-coef, col, x);
                    }
                }
                None
            }
        }
    }

    /// Auxiliary update of every residual after a step along sketch `j`.
    pub(crate) fn auxiliary_update(&self, j: usize, rj: &[f64], residuals: &mut [f64]) {
        self.shared.gram.subtract_column(j, self.tau(), rj, residuals);
    }

    /// Column `j` of `A`, for incremental residual bookkeeping.
    pub(crate) fn column_axpy(&self, j: usize, alpha: f64, y: &mut [f64]) {
        match &self.shared.at {
            Some(at) => at.row_axpy(j, alpha, y),
            None => {
                for (i, yi) in y.iter_mut().enumerate() {
                    let row = self.shared.a.row_dense(i);
                    *yi += alpha * row[j];
                }
            }
        }
    }

    /// `R_i = C_i^T S_i^T (A x - b)`, computed from `x`.
    pub fn sketched_residual_direct(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        if i >= self.q() {
            return Err(Error::invalid(format!(
                "sketch index {i} out of range (q = {})",
                self.q()
            )));
        }
        if x.len() != self.cols() {
            return Err(Error::invalid("iterate has the wrong length"));
        }
        Ok(self.residual_unchecked(i, x))
    }

    pub(crate) fn residual_unchecked(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let a = &self.shared.a;
        let tau = self.tau();
        match &self.shared.map {
            SketchMap::ScaledRows(scale) => vec![scale[i] * (a.row_dot(i, x) - self.b[i])],
            SketchMap::ScaledColumns(scale) => {
                let mut r = a.matvec(x);
                for (ri, bi) in r.iter_mut().zip(&self.b) {
                    *ri -= bi;
                }
                let at = self.shared.at.as_ref().expect("coordinate descent keeps A^T");
                vec![scale[i] * at.row_dot(i, &r)]
            }
            SketchMap::Blocks(blocks) => {
                let rows: Vec<f64> = blocks[i]
                    .iter()
                    .map(|&r| a.row_dot(r, x) - self.b[r])
                    .collect();
                let c = &self.shared.factors[i].c;
                (0..tau)
                    .map(|t| (0..rows.len()).map(|s| c[(s, t)] * rows[s]).sum())
                    .collect()
            }
            SketchMap::Custom(_) => {
                let d = self.shared.direct_rows.as_ref().expect("custom sketches keep D_i");
                (0..tau)
                    .map(|t| {
                        let row = i * tau + t;
                        let s: f64 = (0..x.len()).map(|c| d[(row, c)] * x[c]).sum();
                        s - self.rhs[row]
                    })
                    .collect()
            }
        }
    }

    /// All sketched residuals computed directly: one product with `A`, then the sketch map.
    pub fn residuals_direct(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.shared.a.matvec(x);
        for (ri, bi) in r.iter_mut().zip(&self.b) {
            *ri -= bi;
        }
        let mut out = vec![0.0; self.dim()];
        apply_map(&self.shared, &r, &mut out);
        out
    }

    /// `C_i^T S_i^T r` for every sketch, given an arbitrary residual-space vector `r`.
    pub fn sketch_vector(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        apply_map(&self.shared, r, &mut out);
        out
    }

    /// Whether a fixed rule should keep all residuals current (auxiliary
    /// recursion, `2 tau^2 q` flops) rather than recompute the chosen one
    /// (`2 tau n` flops).
    pub fn fixed_rule_prefers_auxiliary(&self) -> bool {
        self.tau() * self.q() <= self.cols()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, CsrMatrix};

    fn normalized_inner(u: &[f64], v: &[f64]) -> f64 {
        dot(u, v) / (dot(u, u).sqrt() * dot(v, v).sqrt())
    }

    fn system(rows: &[Vec<f64>], b: Vec<f64>, inner: InnerProduct) -> LinearSystem {
        LinearSystem::new(Matrix::from_rows(rows).unwrap(), b, inner, None).unwrap()
    }

    #[test]
    fn kaczmarz_identity_rows() {
        let s = system(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0, 1.0], InnerProduct::Identity);
        let ops = precompute(&s, &SketchSet::RowIdentity).unwrap();
        for i in 0..2 {
            assert_eq!(ops.factor(i).c[(0, 0)], 1.0);
            let mut e = DMatrix::zeros(2, 1);
            e[(i, 0)] = 1.0;
            assert_eq!(ops.direction(i), e);
        }
        assert_eq!(ops.gram().to_dense(2), DMatrix::identity(2, 2));
    }

    #[test]
    fn kaczmarz_single_row() {
        let s = system(&[vec![3.0, 4.0]], vec![5.0], InnerProduct::Identity);
        let ops = precompute(&s, &SketchSet::RowIdentity).unwrap();
        assert!((ops.factor(0).c[(0, 0)] - 0.2).abs() < 1e-16);
        let u = ops.direction(0);
        assert!((u[(0, 0)] - 0.6).abs() < 1e-15 && (u[(1, 0)] - 0.8).abs() < 1e-15);
        assert_eq!(ops.sketched_residual_direct(0, &[0.0, 0.0]).unwrap(), vec![-1.0]);
    }

    #[test]
    fn kaczmarz_gram_of_skewed_rows() {
        let s = system(&[vec![1.0, 0.0], vec![1.0, 1.0]], vec![0.0, 0.0], InnerProduct::Identity);
        let ops = precompute(&s, &SketchSet::RowIdentity).unwrap();
        let g12 = ops.gram_block(0, 1)[(0, 0)];
        assert!((g12 - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((g12 - normalized_inner(&[1.0, 0.0], &[1.0, 1.0])).abs() < 1e-15);
    }

    #[test]
    fn direct_residuals() {
        let s = system(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0, 1.0], InnerProduct::Identity);
        let ops = precompute(&s, &SketchSet::RowIdentity).unwrap();
        for i in 0..2 {
            assert_eq!(ops.sketched_residual_direct(i, &[0.0, 0.0]).unwrap(), vec![-1.0]);
            assert_eq!(ops.sketched_residual_direct(i, &[1.0, 1.0]).unwrap(), vec![0.0]);
        }
        assert!(ops.sketched_residual_direct(2, &[0.0, 0.0]).is_err());
        assert_eq!(ops.residuals_direct(&[0.0, 0.0]), vec![-1.0, -1.0]);
    }

    #[test]
    fn incompatible_pairings_rejected() {
        let rows = [vec![1.0, 0.0], vec![0.0, 1.0]];
        let id = system(&rows, vec![1.0, 1.0], InnerProduct::Identity);
        assert!(matches!(precompute(&id, &SketchSet::ColumnOfA), Err(Error::InvalidInput(_))));
        let gram = system(&rows, vec![1.0, 1.0], InnerProduct::GramOfA);
        assert!(precompute(&gram, &SketchSet::RowIdentity).is_err());
        assert!(precompute(&gram, &SketchSet::ColumnOfA).is_ok());
    }

    #[test]
    fn block_validation() {
        let s = system(&[vec![1.0], vec![2.0], vec![3.0]], vec![1.0, 2.0, 3.0], InnerProduct::Identity);
        assert!(precompute(&s, &SketchSet::RowBlocks(vec![vec![0, 1], vec![1, 2]])).is_err());
        assert!(precompute(&s, &SketchSet::RowBlocks(vec![vec![0, 1], vec![2]])).is_err());
        assert!(precompute(&s, &SketchSet::RowBlocks(vec![vec![0, 5]])).is_err());
        assert!(SketchSet::consecutive_blocks(3, 2).is_err());
        assert!(precompute(&s, &SketchSet::RowBlocks(vec![vec![0, 2]])).is_ok());
    }

    #[test]
    fn zero_row_gives_zero_factor() {
        let s = system(&[vec![0.0, 0.0], vec![1.0, 1.0]], vec![0.0, 2.0], InnerProduct::Identity);
        let ops = precompute(&s, &SketchSet::RowIdentity).unwrap();
        assert_eq!(ops.factor(0).c[(0, 0)], 0.0);
        assert_eq!(ops.factor(0).rank, 0);
        assert_eq!(ops.direction(0), DMatrix::zeros(2, 1));
        assert_eq!(ops.sketched_residual_direct(0, &[3.0, -1.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn coordinate_descent_orthonormal_columns_decouple() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = system(
            &[vec![h, 0.0], vec![h, 0.0], vec![0.0, 1.0]],
            vec![1.0, 1.0, 1.0],
            InnerProduct::GramOfA,
        );
        let ops = precompute(&s, &SketchSet::ColumnOfA).unwrap();
        assert!((ops.gram().to_dense(2) - DMatrix::identity(2, 2)).amax() < 1e-15);
        let u = ops.direction(1);
        assert_eq!(u[(0, 0)], 0.0);
        assert!((u[(1, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sparse_gram_stays_sparse_for_banded_rows() {
        let n = 200;
        let mut trips = Vec::new();
        for i in 0..n {
            trips.push((i, i, 2.0));
            if i + 1 < n {
                trips.push((i, i + 1, -1.0));
            }
        }
        let csr = CsrMatrix::from_triplets(n, n, &trips).unwrap();
        let a = Matrix::Sparse(csr);
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = a.matvec(&x);
        let s = LinearSystem::new(a.clone(), b, InnerProduct::Identity, Some(x)).unwrap();
        let ops = precompute(&s, &SketchSet::RowIdentity).unwrap();
        assert!(ops.gram().is_sparse());
        let dense_sys = LinearSystem::new(Matrix::Dense(a.to_dense()), s.b().to_vec(), InnerProduct::Identity, None).unwrap();
        let dense_ops = precompute(&dense_sys, &SketchSet::RowIdentity).unwrap();
        let diff = ops.gram().to_dense(n) - dense_ops.gram().to_dense(n);
        assert!(diff.amax() < 1e-14);
    }
}
