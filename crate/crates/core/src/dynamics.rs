//! Stationary states and two-time correlators of the master equation.
//!
//! The generator L built in [`crate::operators`] acts on column-stacked
//! density matrices. This module finds its stationary state (the
//! one-dimensional kernel of L), propagates states with a dense matrix
//! exponential, and evaluates two-time correlators through the quantum
//! regression theorem:
//!
//!   <A(0) B(tau) C(0)> = trace( B * exp(L tau)[ C rho_ss A ] )
//!
//! with the operators taken in the stationary state rho_ss. Correlators
//! on a tau grid reuse one matrix exponential per distinct grid step,
//! so a uniform grid costs a single exponential plus one matrix-vector
//! product per point.

use std::collections::HashMap;

use nalgebra::DVector;
use num_complex::Complex64;
use thiserror::Error;

use crate::linalg;
use crate::operators::{hermiticity_defect, unvec_density, vec_density, Liouvillian, Op};

/// Relative tolerance (times the 1-norm of L) below which a singular
/// value of L counts as part of the kernel. The kernel is resolved
/// through eigenvalues of L'L whose absolute accuracy is of order
/// eps * |L|^2, so the threshold must sit above sqrt(eps) * |L|
/// (about 1.5e-8 * |L|); physical relaxation rates are many orders
/// larger, so the window is wide.
const NULL_TOL_REL: f64 = 1e-7;
/// Worst eigenvalue of a state allowed to be clipped to zero; anything
/// more negative is treated as a numerical failure, not noise.
const EIG_CLIP: f64 = -1e-9;
/// Hermiticity defect allowed in a state.
const HERM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("stationary state is not unique: kernel dimension {dim}")]
    DegenerateSteadyState { dim: usize },
    #[error("no kernel within tolerance: smallest singular value {sigma_min:.3e}")]
    NonConvergent { sigma_min: f64 },
    #[error("kernel vector has (near-)zero trace; generator is not relaxing to a state")]
    TracelessNullVector,
    #[error("state has eigenvalue {lambda_min:.3e} below the clipping floor")]
    UnphysicalState { lambda_min: f64 },
    #[error("state is not Hermitian within tolerance: defect {defect:.3e}")]
    NotHermitian { defect: f64 },
    #[error("propagation time must be >= 0, got {t}")]
    NegativeTime { t: f64 },
    #[error("bad tau grid: {0}")]
    BadTauGrid(&'static str),
    #[error("operator dimension {got} does not match the generator dimension {want}")]
    DimensionMismatch { got: usize, want: usize },
}

/// A validated density matrix: Hermitian, unit trace, eigenvalues
/// non-negative after clipping noise-level negatives.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    mat: Op,
}

impl DensityMatrix {
    /// Validate and normalize a candidate state. Small negative
    /// eigenvalues (above -1e-9) are clipped to zero and the trace is
    /// renormalized; larger violations are errors.
    pub fn try_new(mat: Op) -> Result<Self, DynamicsError> {
        let defect = hermiticity_defect(&mat);
        if defect > HERM_TOL {
            return Err(DynamicsError::NotHermitian { defect });
        }
        let herm = (&mat + mat.adjoint()).scale(0.5);
        let tr = herm.trace().re;
        if (tr - 1.0).abs() > 1e-6 {
            // caller should have normalized; treat wildly-off traces as
            // a sign the input was not a state at all
            return Err(DynamicsError::TracelessNullVector);
        }
        let herm = herm.scale(1.0 / tr);
        let se = herm.clone().symmetric_eigen();
        let lambda_min = se.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if lambda_min < EIG_CLIP {
            return Err(DynamicsError::UnphysicalState { lambda_min });
        }
        if lambda_min < 0.0 {
            // rebuild with clipped spectrum
            let d = herm.nrows();
            let mut clipped = Op::zeros(d, d);
            let mut norm = 0.0;
            for k in 0..d {
                let lk = se.eigenvalues[k].max(0.0);
                norm += lk;
                let v = se.eigenvectors.column(k);
                for r in 0..d {
                    for c in 0..d {
                        clipped[(r, c)] += v[r] * v[c].conj() * Complex64::new(lk, 0.0);
                    }
                }
            }
            return Ok(DensityMatrix {
                mat: clipped.scale(1.0 / norm),
            });
        }
        Ok(DensityMatrix { mat: herm })
    }

    pub fn matrix(&self) -> &Op {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// <op> = trace(op rho).
    pub fn expectation(&self, op: &Op) -> Complex64 {
        (op * &self.mat).trace()
    }
}

/// Stationary state of the generator: the unique trace-one solution of
/// L rho = 0. Errors if the kernel is empty or has dimension above one
/// within tolerance (the dimension is reported), or if the kernel
/// vector is not a physical state.
pub fn steady_state(l: &Liouvillian) -> Result<DensityMatrix, DynamicsError> {
    let tol = NULL_TOL_REL * linalg::one_norm(l.matrix()).max(1.0);
    let ns = linalg::null_space(l.matrix(), tol);
    if ns.dim == 0 {
        return Err(DynamicsError::NonConvergent {
            sigma_min: ns.sigma_min,
        });
    }
    if ns.dim > 1 {
        return Err(DynamicsError::DegenerateSteadyState { dim: ns.dim });
    }
    let rho = unvec_density(&ns.vector, l.dim());
    // the kernel vector has unit Frobenius norm and arbitrary phase;
    // dividing by the trace fixes both normalization and phase
    let tr = rho.trace();
    if tr.norm() < 1e-6 {
        return Err(DynamicsError::TracelessNullVector);
    }
    let rho = rho.map(|z| z / tr);
    DensityMatrix::try_new(rho)
}

/// rho(t) = exp(L t) rho0 for t >= 0.
pub fn propagate(
    rho0: &DensityMatrix,
    l: &Liouvillian,
    t: f64,
) -> Result<DensityMatrix, DynamicsError> {
    if t < 0.0 || !t.is_finite() {
        return Err(DynamicsError::NegativeTime { t });
    }
    if rho0.dim() != l.dim() {
        return Err(DynamicsError::DimensionMismatch {
            got: rho0.dim(),
            want: l.dim(),
        });
    }
    let e = linalg::expm(&l.matrix().scale(t));
    let v = e * vec_density(rho0.matrix());
    DensityMatrix::try_new(unvec_density(&v, l.dim()))
}

/// A two-time correlator sampled on a tau grid, with the labels of the
/// three operators it was built from.
#[derive(Debug, Clone)]
pub struct CorrelatorSeries {
    pub tau: Vec<f64>,
    pub values: Vec<Complex64>,
    pub labels: [String; 3],
}

/// <A(0) B(tau) C(0)> on the given grid via the regression theorem.
/// The grid must be finite, non-negative, and strictly increasing; one
/// matrix exponential is computed per distinct step size and reused.
pub fn two_time_correlator(
    rho_ss: &DensityMatrix,
    l: &Liouvillian,
    a: &Op,
    b: &Op,
    c: &Op,
    tau_grid: &[f64],
) -> Result<CorrelatorSeries, DynamicsError> {
    check_tau_grid(tau_grid)?;
    let d = l.dim();
    for op in [a, b, c] {
        if op.nrows() != d || op.ncols() != d {
            return Err(DynamicsError::DimensionMismatch {
                got: op.nrows(),
                want: d,
            });
        }
    }

    let x0 = c * rho_ss.matrix() * a;
    let mut x = vec_density(&x0);
    let mut prev_tau = 0.0;
    let mut cache: HashMap<u64, nalgebra::DMatrix<Complex64>> = HashMap::new();
    let mut values = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        let dt = tau - prev_tau;
        if dt > 0.0 {
            let step = cache
                .entry(dt.to_bits())
                .or_insert_with(|| linalg::expm(&l.matrix().scale(dt)));
            x = &*step * x;
        }
        prev_tau = tau;
        values.push(trace_prod(b, &x, d));
    }
    Ok(CorrelatorSeries {
        tau: tau_grid.to_vec(),
        values,
        labels: [String::from("A"), String::from("B"), String::from("C")],
    })
}

fn check_tau_grid(tau_grid: &[f64]) -> Result<(), DynamicsError> {
    if tau_grid.is_empty() {
        return Err(DynamicsError::BadTauGrid("empty grid"));
    }
    if tau_grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(DynamicsError::BadTauGrid("entries must be finite and >= 0"));
    }
    if tau_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DynamicsError::BadTauGrid("entries must be strictly increasing"));
    }
    Ok(())
}

/// trace(B X) with X given in vectorized (column-stacked) form.
fn trace_prod(b: &Op, x: &DVector<Complex64>, d: usize) -> Complex64 {
    // trace(B X) = sum_{i,j} B_{ij} X_{ji}; X_{ji} = x[i*d + j]
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            s += b[(i, j)] * x[i * d + j];
        }
    }
    s
}
