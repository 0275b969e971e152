//! Spectral constants, rate bounds, step-size factors, exactness, and the flop model.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::norm_sq;
use crate::sampling::{gamma, select_max_distance, validate_probabilities, RngStream, SamplingRule};
use crate::sketch::{PrecomputedOperators, SketchFamily};
use crate::system::{InnerProduct, LinearSystem};

/// Largest `n` for which `sigma_p_sq` runs a dense eigensolve.
pub const SPECTRAL_DIM_LIMIT: usize = 2000;
/// Largest `m` for which `check_exactness` forms `E[H]`.
pub const EXACTNESS_ROW_LIMIT: usize = 500;

const ZERO_EIG_CUTOFF: f64 = 1e-10;

/// Which per-iteration cost table applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FlopMethod {
    Kaczmarz,
    Cd,
    General,
}

impl fmt::Display for FlopMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlopMethod::Kaczmarz => "kaczmarz",
            FlopMethod::Cd => "cd",
            FlopMethod::General => "general",
        })
    }
}

/// Dimensions fed to the per-iteration cost tables (all matrices counted dense).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FlopModel {
    pub method: FlopMethod,
    pub tau: u64,
    pub q: u64,
    pub m: u64,
    pub n: u64,
}

impl FlopModel {
    pub fn new(method: FlopMethod, tau: u64, q: u64, m: u64, n: u64) -> Result<Self> {
        if tau == 0 || q == 0 || m == 0 || n == 0 {
            return Err(Error::invalid("flop model dimensions must be at least 1"));
        }
        match method {
            FlopMethod::Kaczmarz if tau != 1 || q != m => {
                Err(Error::invalid("Kaczmarz costs need tau = 1 and q = m"))
            }
            FlopMethod::Cd if tau != 1 || q != n => Err(Error::invalid("coordinate descent costs need tau = 1 and q = n")),
            _ => Ok(Self { method, tau, q, m, n }),
        }
    }

    pub fn kaczmarz(m: u64, n: u64) -> Result<Self> {
        Self::new(FlopMethod::Kaczmarz, 1, m, m, n)
    }

    pub fn cd(m: u64, n: u64) -> Result<Self> {
        Self::new(FlopMethod::Cd, 1, n, m, n)
    }

    pub fn general(tau: u64, q: u64, m: u64, n: u64) -> Result<Self> {
        Self::new(FlopMethod::General, tau, q, m, n)
    }

    pub fn for_operators(ops: &PrecomputedOperators) -> Result<Self> {
        let (m, n) = (ops.rows() as u64, ops.cols() as u64);
        match ops.family() {
            SketchFamily::Kaczmarz => Self::kaczmarz(m, n),
            SketchFamily::CoordinateDescent => Self::cd(m, n),
            SketchFamily::General => Self::general(ops.tau() as u64, ops.q() as u64, m, n),
        }
    }
}

/// Model flops of one iteration under `rule`.
pub fn flops_per_iteration(fm: &FlopModel, rule: &SamplingRule) -> Result<u64> {
    let FlopModel { tau, q, m, n, .. } = *fm;
    FlopModel::new(fm.method, tau, q, m, n)?;
    let fixed = !rule.is_adaptive();
    Ok(match fm.method {
        FlopMethod::Kaczmarz => match rule {
            _ if fixed => 2 * n.min(m) + 2 * n,
            SamplingRule::MaxDistance => 3 * m + 2 * n,
            SamplingRule::ProportionalToLoss => 5 * m + 2 * n,
            _ => 9 * m + 2 * n,
        },
        FlopMethod::Cd => match rule {
            _ if fixed => 2 * n,
            SamplingRule::MaxDistance => 3 * n,
            SamplingRule::ProportionalToLoss => 5 * n,
            _ => 9 * n,
        },
        FlopMethod::General => {
            let t2 = 2 * tau * tau + 2 * tau;
            match rule {
                _ if fixed => 2 * tau * n.min(tau * q) + 2 * tau * n,
                SamplingRule::MaxDistance if tau == 1 => 3 * q + 2 * n,
                SamplingRule::MaxDistance => t2 * q + 2 * tau * n,
                SamplingRule::ProportionalToLoss => (t2 + 1) * q + 2 * tau * n,
                _ => (t2 + 5) * q + 2 * tau * n,
            }
        }
    })
}

/// Numerical rank of `A` from its singular values.
pub fn numerical_rank(system: &LinearSystem) -> usize {
    let a = system.a().to_nalgebra();
    let sv = SVD::new(a, false, false).singular_values;
    let smax = sv.max();
    if smax <= 0.0 {
        return 0;
    }
    let tol = system.rows().max(system.cols()) as f64 * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > tol).count()
}

/// `[C_i^T S_i^T A]`, stacked as `q*tau x n`.
fn sketched_a(system: &LinearSystem, ops: &PrecomputedOperators) -> DMatrix<f64> {
    let a = system.a().to_nalgebra();
    let mut d = DMatrix::zeros(ops.dim(), system.cols());
    for j in 0..system.cols() {
        let col: Vec<f64> = a.column(j).iter().copied().collect();
        d.column_mut(j).copy_from_slice(&ops.sketch_vector(&col));
    }
    d
}

/// `sigma_p^2`: the smallest eigenvalue of `E_{i~p}[Z_i]` over `range(B^{-1/2} A^T)`.
/// Zero when exactness fails.
pub fn sigma_p_sq(system: &LinearSystem, ops: &PrecomputedOperators, p: &[f64]) -> Result<f64> {
    validate_probabilities(p, ops.q())?;
    let n = system.cols();
    if n > SPECTRAL_DIM_LIMIT {
        return Err(Error::Unsupported(format!(
            "spectral analysis needs n <= {SPECTRAL_DIM_LIMIT}, got {n}"
        )));
    }
    let tau = ops.tau();
    let dim = ops.dim();
    let weight = |row: usize| p[row / tau];
    let matrix = if dim <= n || matches!(system.inner(), InnerProduct::GramOfA) {
        // nonzero spectrum of W P W^T equals that of P^{1/2} G P^{1/2}
        let mut k = ops.gram().to_dense(dim);
        for j in 0..dim {
            for i in 0..dim {
                k[(i, j)] *= (weight(i) * weight(j)).sqrt();
            }
        }
        k
    } else {
        let d = sketched_a(system, ops);
        let x = match system.inner() {
            InnerProduct::ExplicitSpd(b) => {
                let l = b.cholesky_l();
                let xt = l
                    .solve_lower_triangular(&d.transpose())
                    .ok_or_else(|| Error::invalid("singular Cholesky factor"))?;
                xt.transpose()
            }
            _ => d,
        };
        let mut px = x.clone();
        for i in 0..dim {
            px.row_mut(i).scale_mut(weight(i));
        }
        x.transpose() * px
    };
    let rank = numerical_rank(system);
    Ok(rth_largest_eigenvalue(matrix, rank))
}

fn rth_largest_eigenvalue(matrix: DMatrix<f64>, rank: usize) -> f64 {
    if rank == 0 {
        return 0.0;
    }
    let sym = (&matrix + matrix.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let lmax = eig.first().copied().unwrap_or(0.0);
    match eig.get(rank - 1) {
        Some(&l) if l > ZERO_EIG_CUTOFF * lmax => l,
        _ => 0.0,
    }
}

/// Upper-bound estimate of `sigma_inf^2` from random directions in
/// `range(B^{-1} A^T)`, each followed by a short greedy trajectory.
pub fn estimate_sigma_inf_sq(
    system: &LinearSystem,
    ops: &PrecomputedOperators,
    n_probes: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    if n_probes < 1 {
        return Err(Error::invalid("at least one probe is needed"));
    }
    let m = system.rows();
    let ops0 = ops.with_rhs(&vec![0.0; m])?;
    let tau = ops.tau();
    let steps = (2 * ops.q()).min(2000);
    let mut best = f64::INFINITY;
    for _ in 0..n_probes {
        let omega: Vec<f64> = (0..m).map(|_| rng.normal()).collect();
        let mut v = system.a().matvec_t(&omega);
        if let InnerProduct::ExplicitSpd(b) = system.inner() {
            v = b.solve(&v);
        }
        let e0 = system.b_norm_sq(&v)?;
        if !(e0 > 0.0) {
            continue;
        }
        let mut e = e0;
        let mut r = ops0.residuals_direct(&v);
        let mut f = vec![0.0; ops.q()];
        for step in 0..=steps {
            for (fi, ri) in f.iter_mut().zip(r.chunks_exact(tau)) {
                *fi = norm_sq(ri);
            }
            if e > 1e-8 * e0 {
                let max = f.iter().copied().fold(0.0, f64::max);
                best = best.min(max / e);
            } else {
                break;
            }
            let Some(i) = select_max_distance(&f, 0.0) else { break };
            let ri = r[i * tau..(i + 1) * tau].to_vec();
            ops0.apply_direction(i, &ri, &mut v);
            ops0.auxiliary_update(i, &ri, &mut r);
            e -= f[i];
            if step % 25 == 24 {
                e = system.b_norm_sq(&v)?;
                r = ops0.residuals_direct(&v);
            }
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::invalid("A^T has a trivial range; no probe direction exists"))
    }
}

/// Whether `ker(E_{i~p}[H_i])` lies in `ker(A^T)`.
pub fn check_exactness(system: &LinearSystem, ops: &PrecomputedOperators, p: &[f64]) -> Result<bool> {
    validate_probabilities(p, ops.q())?;
    let m = system.rows();
    if m > EXACTNESS_ROW_LIMIT {
        return Err(Error::Unsupported(format!(
            "exactness check needs m <= {EXACTNESS_ROW_LIMIT}, got {m}"
        )));
    }
    let tau = ops.tau();
    // column j of T is C^T S^T e_j, so E[H] = T^T P T
    let mut t = DMatrix::zeros(ops.dim(), m);
    let mut e = vec![0.0; m];
    for j in 0..m {
        e[j] = 1.0;
        t.column_mut(j).copy_from_slice(&ops.sketch_vector(&e));
        e[j] = 0.0;
    }
    let mut pt = t.clone();
    for i in 0..ops.dim() {
        pt.row_mut(i).scale_mut(p[i / tau]);
    }
    let h = t.transpose() * pt;
    let h = (&h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(h);
    let lmax = eig.eigenvalues.max();
    let a = system.a().to_nalgebra();
    let scale = a.norm().max(f64::MIN_POSITIVE);
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l <= ZERO_EIG_CUTOFF * lmax.max(0.0) {
            let v = eig.eigenvectors.column(k);
            let atv = a.tr_mul(&v);
            if atv.norm() > 1e-8 * scale {
                return Ok(false);
            }
        }
    }
    Ok(lmax > 0.0 || a.norm() == 0.0)
}

/// Spectral inputs to the rate bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateInputs {
    /// `sigma_p^2` for the fixed or reference distribution.
    pub sigma_p_sq: f64,
    /// `sigma_p^2` for the uniform distribution.
    pub sigma_u_sq: f64,
    pub sigma_inf_sq: f64,
    /// `gamma` of the reference distribution.
    pub gamma: f64,
    pub theta: f64,
}

/// Per-step contraction bounds, each clamped to `[0, 1]`.
pub fn rate_bounds(r: &RateInputs) -> BTreeMap<String, f64> {
    let clamp = |v: f64| v.clamp(0.0, 1.0);
    let th = r.theta;
    BTreeMap::from([
        ("fixed".to_string(), clamp(1.0 - r.sigma_p_sq)),
        ("uniform".to_string(), clamp(1.0 - r.sigma_u_sq)),
        ("maxdist".to_string(), clamp(1.0 - r.sigma_inf_sq)),
        ("proportional".to_string(), clamp(1.0 - 2.0 * r.sigma_u_sq)),
        (
            "capped_reference".to_string(),
            clamp(1.0 - th * r.sigma_inf_sq - (1.0 - th) * r.sigma_p_sq),
        ),
        (
            "capped_gamma".to_string(),
            clamp(1.0 - (th * r.gamma + (1.0 - th)) * r.sigma_p_sq),
        ),
    ])
}

/// `sum_i p_i f_i / err`, or `None` when `err <= tol`.
pub fn step_size_factor(f: &[f64], p: &[f64], err_b_sq: f64, tol: f64) -> Option<f64> {
    let expected: f64 = f.iter().zip(p).map(|(a, b)| a * b).sum();
    crate::solver::step_size_factor(expected, err_b_sq, tol)
}

/// `Var_u(p) = (1/q) sum_i (p_i - 1/q)^2`.
pub fn uniform_variance(p: &[f64]) -> f64 {
    let q = p.len() as f64;
    p.iter().map(|&v| (v - 1.0 / q).powi(2)).sum::<f64>() / q
}

/// Everything `analyze` reports for one system and sketch set.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralReport {
    pub method: FlopMethod,
    pub rows: usize,
    pub cols: usize,
    pub q: usize,
    pub tau: usize,
    /// `sigma_p^2` for the reference distribution.
    pub sigma_p_sq: f64,
    pub sigma_u_sq: f64,
    /// Upper-bound estimate.
    pub sigma_inf_sq_estimate: f64,
    pub gamma: Option<f64>,
    pub theta: f64,
    pub exactness: Option<bool>,
    pub rate_bounds: BTreeMap<String, f64>,
    /// Model flops per iteration for each rule.
    pub flops_per_iteration: BTreeMap<String, u64>,
}

/// Builds a [`SpectralReport`]; `reference` is the fixed or capped reference distribution.
pub fn spectral_report(
    system: &LinearSystem,
    ops: &PrecomputedOperators,
    reference: &[f64],
    theta: f64,
    n_probes: usize,
    rng: &mut RngStream,
) -> Result<SpectralReport> {
    let q = ops.q();
    let uniform = vec![1.0 / q as f64; q];
    let sigma_p = sigma_p_sq(system, ops, reference)?;
    let sigma_u = sigma_p_sq(system, ops, &uniform)?;
    let sigma_inf = estimate_sigma_inf_sq(system, ops, n_probes, rng)?;
    let g = gamma(reference).ok();
    let exactness = match check_exactness(system, ops, reference) {
        Ok(v) => Some(v),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e),
    };
    let inputs = RateInputs {
        sigma_p_sq: sigma_p,
        sigma_u_sq: sigma_u,
        sigma_inf_sq: sigma_inf,
        gamma: g.unwrap_or(1.0),
        theta,
    };
    let fm = FlopModel::for_operators(ops)?;
    let mut flops = BTreeMap::new();
    for rule in [
        SamplingRule::Uniform,
        SamplingRule::NormProportional,
        SamplingRule::MaxDistance,
        SamplingRule::ProportionalToLoss,
        SamplingRule::capped(theta),
    ] {
        flops.insert(rule.label(), flops_per_iteration(&fm, &rule)?);
    }
    Ok(SpectralReport {
        method: fm.method,
        rows: system.rows(),
        cols: system.cols(),
        q,
        tau: ops.tau(),
        sigma_p_sq: sigma_p,
        sigma_u_sq: sigma_u,
        sigma_inf_sq_estimate: sigma_inf,
        gamma: g,
        theta,
        exactness,
        rate_bounds: rate_bounds(&inputs),
        flops_per_iteration: flops,
    })
}

impl fmt::Display for SpectralReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "method            {} ({}x{}, q={}, tau={})", self.method, self.rows, self.cols, self.q, self.tau)?;
        writeln!(f, "sigma_p^2 (ref)   {:.6e}", self.sigma_p_sq)?;
        writeln!(f, "sigma_u^2         {:.6e}", self.sigma_u_sq)?;
        writeln!(f, "sigma_inf^2 <=    {:.6e}", self.sigma_inf_sq_estimate)?;
        match self.gamma {
            Some(g) => writeln!(f, "gamma             {g:.6}")?,
            None => writeln!(f, "gamma             undefined")?,
        }
        match self.exactness {
            Some(e) => writeln!(f, "exactness         {}", if e { "holds" } else { "fails" })?,
            None => writeln!(f, "exactness         not checked (too large)")?,
        }
        writeln!(f, "rate bounds (theta = {})", self.theta)?;
        for (k, v) in &self.rate_bounds {
            writeln!(f, "  {k:<18} {v:.8}")?;
        }
        writeln!(f, "flops per iteration")?;
        for (k, v) in &self.flops_per_iteration {
            writeln!(f, "  {k:<18} {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::sketch::{precompute, SketchSet};

    fn identity_system(n: usize) -> LinearSystem {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        LinearSystem::new(Matrix::from_rows(&rows).unwrap(), vec![1.0; n], InnerProduct::Identity, None).unwrap()
    }

    #[test]
    fn flop_table_examples() {
        let k = FlopModel::kaczmarz(1000, 100).unwrap();
        assert_eq!(flops_per_iteration(&k, &SamplingRule::MaxDistance).unwrap(), 3200);
        let cd = FlopModel::cd(1000, 100).unwrap();
        assert_eq!(flops_per_iteration(&cd, &SamplingRule::capped(0.5)).unwrap(), 900);
        let g = FlopModel::general(2, 10, 20, 50).unwrap();
        assert_eq!(flops_per_iteration(&g, &SamplingRule::Uniform).unwrap(), 280);
        assert!(FlopModel::kaczmarz(0, 3).is_err());
        assert!(FlopModel::new(FlopMethod::Kaczmarz, 2, 5, 5, 3).is_err());
    }

    #[test]
    fn identity_uniform_sigma() {
        for n in [2, 5] {
            let s = identity_system(n);
            let ops = precompute(&s, &SketchSet::RowIdentity).unwrap();
            let u = vec![1.0 / n as f64; n];
            assert!((sigma_p_sq(&s, &ops, &u).unwrap() - 1.0 / n as f64).abs() < 1e-12);
            let est = estimate_sigma_inf_sq(&s, &ops, 5, &mut RngStream::new(1)).unwrap();
            assert!(est >= 1.0 / n as f64 - 1e-12 && est <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn rate_bound_examples() {
        let b = rate_bounds(&RateInputs {
            sigma_p_sq: 0.5,
            sigma_u_sq: 0.5,
            sigma_inf_sq: 0.5,
            gamma: 2.0,
            theta: 1.0,
        });
        assert_eq!(b["fixed"], 0.5);
        assert_eq!(b["proportional"], 0.0);
        assert_eq!(b["capped_gamma"], 0.0);
    }

    #[test]
    fn step_factor_examples() {
        let f = [1.0, 1.0];
        assert_eq!(step_size_factor(&f, &[0.5, 0.5], 2.0, 1e-10), Some(0.5));
        assert_eq!(step_size_factor(&f, &[1.0, 0.0], 2.0, 1e-10), Some(0.5));
        assert_eq!(step_size_factor(&[0.0, 0.0], &[0.5, 0.5], 0.0, 1e-10), None);
    }

    #[test]
    fn exactness_examples() {
        let s = identity_system(2);
        let ops = precompute(&s, &SketchSet::RowIdentity).unwrap();
        assert!(check_exactness(&s, &ops, &[0.5, 0.5]).unwrap());
        assert!(!check_exactness(&s, &ops, &[1.0, 0.0]).unwrap());
        let full = precompute(&s, &SketchSet::CustomDense(vec![DMatrix::identity(2, 2)])).unwrap();
        assert!(check_exactness(&s, &full, &[1.0]).unwrap());
        let est = estimate_sigma_inf_sq(&s, &full, 3, &mut RngStream::new(2)).unwrap();
        assert!((est - 1.0).abs() < 1e-12);
    }

    #[test]
    fn variance_of_uniform_is_zero() {
        assert_eq!(uniform_variance(&[0.25; 4]), 0.0);
        assert!((uniform_variance(&[1.0, 0.0]) - 0.25).abs() < 1e-16);
    }
}
