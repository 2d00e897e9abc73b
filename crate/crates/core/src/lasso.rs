//! ADMM solver for the per-block LASSO problem
//!
//! ```text
//! minimize  (1/2)‖Φ s − y‖² + λ‖s‖₁
//! ```
//!
//! in the usual split form `x − z = 0` with scaled dual `u`:
//!
//! ```text
//! x ← (ΦᵀΦ + ρI)⁻¹ (Φᵀy + ρ(z − u))
//! z ← S_{λ/ρ}(x + u)
//! u ← u + x − z
//! ```
//!
//! Iteration stops once the primal residual `‖x − z‖` and the dual residual
//! `ρ‖z − z_prev‖` fall under the combined absolute/relative thresholds.
//! The stopped iterate is then polished: on the support and signs of `z`
//! the optimality system is linear, so it is solved directly and accepted
//! when it satisfies the full optimality conditions. If it does not, the
//! iteration continues with tighter thresholds.
//!
//! Φ is shared by every block, so `ΦᵀΦ + ρI` is factored once in
//! [`prefactor`] and the handle reused read-only.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::measurement::MeasurementMatrix;

/// How λ is chosen for each solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Lambda {
    /// Use this value directly.
    Fixed(f64),
    /// `scale · ‖Φᵀy‖∞`, recomputed per block.
    Relative(f64),
}

impl Lambda {
    pub fn resolve(&self, correlation: &DVector<f64>) -> f64 {
        match *self {
            Lambda::Fixed(v) => v,
            Lambda::Relative(scale) => scale * correlation.amax(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub rho: f64,
    pub lambda: Lambda,
    /// Start each block from the previous block's solution.
    pub warm_start: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            abs_tol: 1e-4,
            rel_tol: 1e-2,
            rho: 1.0,
            lambda: Lambda::Relative(1e-3),
            warm_start: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.max_iters == 0 {
            errs.push("solver max_iters must be at least 1".to_string());
        }
        for (name, v) in [
            ("abs_tol", self.abs_tol),
            ("rel_tol", self.rel_tol),
            ("rho", self.rho),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("solver {name} must be positive (got {v})"));
            }
        }
        let lam = match self.lambda {
            Lambda::Fixed(v) | Lambda::Relative(v) => v,
        };
        if !(lam > 0.0 && lam.is_finite()) {
            errs.push(format!("solver lambda must be positive (got {lam})"));
        }
        errs
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    /// Whether the returned point came from the support polish step.
    pub polished: bool,
    pub lambda: f64,
}

/// Cached factorization shared by all solves against one matrix.
#[derive(Clone, Debug)]
pub struct FactorHandle {
    phi: DMatrix<f64>,
    gram: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    rho: f64,
}

impl FactorHandle {
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    /// `ΦᵀΦ`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Lower Cholesky factor of `ΦᵀΦ + ρI`.
    pub fn factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn measurements(&self) -> usize {
        self.phi.nrows()
    }
}

pub fn prefactor(phi: &MeasurementMatrix, rho: f64) -> Result<FactorHandle> {
    prefactor_matrix(phi.matrix().clone(), rho)
}

pub fn prefactor_matrix(phi: DMatrix<f64>, rho: f64) -> Result<FactorHandle> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    let gram = phi.tr_mul(&phi);
    let n = gram.nrows();
    let shifted = &gram + DMatrix::<f64>::identity(n, n) * rho;
    let chol = Cholesky::new(shifted)
        .ok_or_else(|| Error::Factorization("ΦᵀΦ + ρI is not positive definite".into()))?;
    Ok(FactorHandle {
        phi,
        gram,
        chol,
        rho,
    })
}

pub fn soft_threshold(v: f64, kappa: f64) -> f64 {
    if v > kappa {
        v - kappa
    } else if v < -kappa {
        v + kappa
    } else {
        0.0
    }
}

/// `(1/2)‖Φs − y‖² + λ‖s‖₁`.
pub fn objective(handle: &FactorHandle, y: &[f64], s: &[f64], lambda: f64) -> f64 {
    let r = &handle.phi * DVector::from_column_slice(s) - DVector::from_column_slice(y);
    0.5 * r.norm_squared() + lambda * s.iter().map(|v| v.abs()).sum::<f64>()
}

/// Gradient of the smooth part, `Φᵀ(Φs − y)`.
pub fn smooth_gradient(handle: &FactorHandle, y: &[f64], s: &[f64]) -> DVector<f64> {
    let r = &handle.phi * DVector::from_column_slice(s) - DVector::from_column_slice(y);
    handle.phi.tr_mul(&r)
}

/// Checks the LASSO optimality conditions with relative slack `eps`:
/// every gradient entry lies in `[−λ(1+ε), λ(1+ε)]`, and where `s_j ≠ 0`
/// the entry equals `−λ·sign(s_j)` to within `ελ`.
pub fn satisfies_kkt(handle: &FactorHandle, y: &[f64], s: &[f64], lambda: f64, eps: f64) -> bool {
    let g = smooth_gradient(handle, y, s);
    kkt_holds(&g, s, lambda, eps, 0.0)
}

fn kkt_holds(g: &DVector<f64>, s: &[f64], lambda: f64, eps: f64, floor: f64) -> bool {
    let slack = lambda * eps + floor;
    g.iter().zip(s).all(|(&gj, &sj)| {
        if sj != 0.0 {
            (gj + lambda * sj.signum()).abs() <= slack
        } else {
            gj.abs() <= lambda + slack
        }
    })
}

pub fn solve_lasso(y: &[f64], handle: &FactorHandle, cfg: &SolverConfig) -> Result<SolveResult> {
    solve_lasso_warm(y, handle, cfg, None)
}

pub fn solve_lasso_warm(
    y: &[f64],
    handle: &FactorHandle,
    cfg: &SolverConfig,
    start: Option<&[f64]>,
) -> Result<SolveResult> {
    if y.len() != handle.measurements() {
        return Err(Error::Dimension(format!(
            "measurement length {} does not match matrix height {}",
            y.len(),
            handle.measurements()
        )));
    }
    let q = handle.phi.tr_mul(&DVector::from_column_slice(y));
    solve_from_correlation(&q, handle, cfg, start)
}

/// Solves given `q = Φᵀy` directly. The ADMM updates only ever touch `y`
/// through `q`, which lets callers batch the correlation as one product.
pub fn solve_from_correlation(
    q: &DVector<f64>,
    handle: &FactorHandle,
    cfg: &SolverConfig,
    start: Option<&[f64]>,
) -> Result<SolveResult> {
    let n = handle.dim();
    if q.len() != n {
        return Err(Error::Dimension(format!(
            "correlation length {} does not match {n} unknowns",
            q.len()
        )));
    }
    if let Some(s) = start {
        if s.len() != n {
            return Err(Error::Dimension("warm start has the wrong length".into()));
        }
    }
    let rho = handle.rho;
    let lambda = cfg.lambda.resolve(q);
    let kappa = lambda / rho;
    let sqrt_n = (n as f64).sqrt();
    // Gradient entries are compared against λ; the floor absorbs rounding
    // when λ is tiny relative to ‖q‖.
    let floor = 1e-12 * (1.0 + q.amax());

    let mut z = start.map_or_else(|| DVector::zeros(n), DVector::from_column_slice);
    let mut u = DVector::<f64>::zeros(n);
    let mut x = z.clone();
    let mut rhs = DVector::<f64>::zeros(n);
    let (mut abs_tol, mut rel_tol) = (cfg.abs_tol, cfg.rel_tol);
    let mut iterations = 0;
    let (mut r_norm, mut s_norm) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;

    while iterations < cfg.max_iters {
        iterations += 1;
        rhs.copy_from(q);
        rhs.axpy(rho, &(&z - &u), 1.0);
        x.copy_from(&rhs);
        handle.chol.solve_mut(&mut x);

        let z_prev = z.clone();
        for ((zj, &xj), &uj) in z.iter_mut().zip(x.iter()).zip(u.iter()) {
            *zj = soft_threshold(xj + uj, kappa);
        }
        u += &x - &z;

        r_norm = (&x - &z).norm();
        s_norm = rho * (&z - &z_prev).norm();
        let eps_pri = sqrt_n * abs_tol + rel_tol * x.norm().max(z.norm());
        let eps_dual = sqrt_n * abs_tol + rel_tol * rho * u.norm();
        if r_norm <= eps_pri && s_norm <= eps_dual {
            converged = true;
            if let Some(p) = polish(q, handle, &z, lambda, floor) {
                return Ok(SolveResult {
                    solution: p.iter().copied().collect(),
                    iterations,
                    primal_residual: r_norm,
                    dual_residual: s_norm,
                    converged,
                    polished: true,
                    lambda,
                });
            }
            // Wrong support guess; keep iterating toward a tighter point.
            abs_tol *= 0.1;
            rel_tol *= 0.1;
        }
    }

    let polished = polish(q, handle, &z, lambda, floor);
    Ok(SolveResult {
        polished: polished.is_some(),
        solution: polished.unwrap_or(z).iter().copied().collect(),
        iterations,
        primal_residual: r_norm,
        dual_residual: s_norm,
        converged,
        lambda,
    })
}

/// Solves `Φ_Sᵀ Φ_S s_S = q_S − λ sign(z_S)` on the support `S` of `z` and
/// returns the candidate only if it satisfies the optimality conditions.
fn polish(
    q: &DVector<f64>,
    handle: &FactorHandle,
    z: &DVector<f64>,
    lambda: f64,
    floor: f64,
) -> Option<DVector<f64>> {
    let n = z.len();
    let support: Vec<usize> = (0..n).filter(|&j| z[j] != 0.0).collect();
    let mut s = DVector::zeros(n);
    if !support.is_empty() {
        let k = support.len();
        let sub = DMatrix::from_fn(k, k, |a, b| handle.gram[(support[a], support[b])]);
        let rhs = DVector::from_fn(k, |a, _| q[support[a]] - lambda * z[support[a]].signum());
        let sol = Cholesky::new(sub)?.solve(&rhs);
        for (a, &j) in support.iter().enumerate() {
            if sol[a] == 0.0 || sol[a].signum() != z[j].signum() {
                return None;
            }
            s[j] = sol[a];
        }
    }
    let g = &handle.gram * &s - q;
    let ok = kkt_holds(&g, s.as_slice(), lambda, 1e-9, floor);
    ok.then_some(s)
}
